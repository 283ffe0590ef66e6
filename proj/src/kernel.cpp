#include "deconv/kernel.hpp"
#include "deconv/errors.hpp"
#include "deconv/quadrature.hpp"

#include <array>
#include <cmath>

namespace deconv {

namespace {

constexpr int moment_nodes = 200;
constexpr int max_kernel_order = 12;

double binom(int n, int k)
{
  double r = 1.0;
  for (int i = 1; i <= k; ++i)
    r = r * (n - k + i) / i;
  return r;
}

// even polynomial sum c[i] t^{2i} and its derivatives
double poly_eval(const std::vector<double>& c, int order, double t)
{
  double acc = 0.0;
  for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) {
    int power = 2 * i;
    double term = 0.0;
    if (power >= order) {
      double f = 1.0;
      for (int s = 0; s < order; ++s)
        f *= (power - s);
      term = c[i] * f * std::pow(t, power - order);
    }
    acc += term;
  }
  return acc;
}

} // namespace

double bump(double t)
{
  double s = 1.0 - t * t;
  if (s <= 0.0)
    return 0.0;
  return std::exp(-1.0 / s);
}

FlatKernel::FlatKernel(int k0, int max_deriv)
  : k0_(k0)
  , max_deriv_(max_deriv)
{
  if (k0 < 1)
    throw invalid_parameter("kernel needs at least one vanishing moment");
  if (k0 > max_kernel_order)
    throw unsupported_order("kernel order " + std::to_string(k0) + " exceeds " +
                            std::to_string(max_kernel_order));
  if (max_deriv < 0 || max_deriv > 12)
    throw unsupported_order("kernel derivative order must be in 0..12");

  const auto& rule = cached_gauss_legendre(moment_nodes);
  std::vector<double> w(moment_nodes);
  for (int i = 0; i < moment_nodes; ++i)
    w[i] = rule.weights[i] * bump(rule.nodes[i]);
  auto inner = [&](const std::vector<double>& p, const std::vector<double>& q) {
    NeumaierSum acc;
    for (int i = 0; i < moment_nodes; ++i)
      acc.add(w[i] * poly_eval(p, 0, rule.nodes[i]) * poly_eval(q, 0, rule.nodes[i]));
    return acc.value();
  };

  // orthonormal even polynomials under the bump weight (Gram-Schmidt, twice)
  int terms = k0 / 2 + 1;
  std::vector<std::vector<double>> basis;
  for (int j = 0; j < terms; ++j) {
    std::vector<double> v(terms, 0.0);
    v[j] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        double proj = inner(v, b);
        for (int i = 0; i < terms; ++i)
          v[i] -= proj * b[i];
      }
    double nrm = std::sqrt(inner(v, v));
    if (!(nrm > 1e-300))
      throw numerical_failure("moment system is singular");
    for (auto& x : v)
      x /= nrm;
    basis.push_back(std::move(v));
  }
  // reproducing kernel at the origin: sum_i q_i(0) q_i(t)
  coeffs_.assign(terms, 0.0);
  for (const auto& b : basis)
    for (int i = 0; i < terms; ++i)
      coeffs_[i] += b[0] * b[i];

  if (std::abs(moment(0) - 1.0) > 1e-8)
    throw numerical_failure("kernel normalization failed");
  for (int j = 1; j <= k0_; ++j)
    if (std::abs(moment(j)) > 1e-8)
      throw numerical_failure("kernel moment " + std::to_string(j) +
                              " does not vanish");
}

double FlatKernel::eval(int order, double t) const
{
  if (order < 0 || order > max_deriv_)
    throw unsupported_order("kernel derivative order " + std::to_string(order) +
                            " exceeds " + std::to_string(max_deriv_));
  double s = 1.0 - t * t;
  if (s <= 0.0)
    return 0.0;
  double phi = -1.0 / s;
  if (phi < -700.0)
    return 0.0;
  double e = std::exp(phi);
  if (order == 0)
    return e * poly_eval(coeffs_, 0, t);

  // derivatives of phi = -(1/2)[(1-t)^{-1} + (1+t)^{-1}]
  std::array<double, 14> dphi{};
  double u = 1.0 / (1.0 - t), v = 1.0 / (1.0 + t);
  double upow = u, vpow = v, fact = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) {
      fact *= k;
      upow *= u;
      vpow *= v;
    }
    dphi[k] = -0.5 * fact * (upow + ((k % 2) ? -vpow : vpow));
  }
  // g_n = e^{-phi} d^n e^{phi}
  std::array<double, 14> g{};
  g[0] = 1.0;
  for (int n = 1; n <= order; ++n) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
      acc += binom(n - 1, k) * dphi[k + 1] * g[n - 1 - k];
    g[n] = acc;
  }
  double acc = 0.0;
  for (int j = 0; j <= order; ++j)
    acc += binom(order, j) * poly_eval(coeffs_, j, t) * g[order - j];
  return e * acc;
}

std::complex<double> FlatKernel::laplace(std::complex<double> z) const
{
  auto f = [&](double t) { return eval(0, t) * std::exp(-z * t); };
  int panels = 4 + static_cast<int>(std::abs(z.imag()) / 4.0);
  auto prev = integrate_panels(std::function<std::complex<double>(double)>(f), -1.0, 1.0, panels);
  for (int iter = 0; iter < 8; ++iter) {
    panels *= 2;
    auto next = integrate_panels(std::function<std::complex<double>(double)>(f), -1.0, 1.0, panels);
    if (std::abs(next - prev) <= 1e-14 * (1.0 + std::abs(next)))
      return next;
    prev = next;
  }
  return prev;
}

std::complex<double> FlatKernel::fourier(double omega) const
{
  return laplace({ 0.0, omega });
}

double FlatKernel::moment(int j) const
{
  return integrate_gl([&](double t) { return std::pow(t, j) * eval(0, t); },
                      -1.0,
                      1.0,
                      moment_nodes);
}

double FlatKernel::norm2(int order) const
{
  double sq = integrate_gl(
    [&](double t) {
      double v = eval(order, t);
      return v * v;
    },
    -1.0,
    1.0,
    moment_nodes);
  return std::sqrt(sq);
}

FlatKernel build_kernel(int k0)
{
  return FlatKernel(k0);
}

KernelTransform::KernelTransform(const FlatKernel& kernel, double max_frequency)
{
  constexpr int order = 20;
  panels_ = 8 + static_cast<int>(std::ceil(std::abs(max_frequency) / 5.0));
  width_ = 2.0 / panels_;
  const auto& rule = cached_gauss_legendre(order);
  for (int i = 0; i < order; ++i)
    nodes_.push_back(0.5 * width_ * rule.nodes[i]);
  for (int p = 0; p < panels_; ++p) {
    double mid = -1.0 + (p + 0.5) * width_;
    for (int i = 0; i < order; ++i)
      weighted_.push_back(0.5 * width_ * rule.weights[i] * kernel(mid + nodes_[i]));
  }
}

std::complex<double> KernelTransform::operator()(std::complex<double> z) const
{
  int order = static_cast<int>(nodes_.size());
  std::vector<std::complex<double>> local(order);
  for (int i = 0; i < order; ++i)
    local[i] = std::exp(-z * nodes_[i]);
  std::complex<double> step = std::exp(-z * width_);
  std::complex<double> panel = std::exp(-z * (-1.0 + 0.5 * width_));
  std::complex<double> acc = 0.0;
  for (int p = 0; p < panels_; ++p) {
    std::complex<double> part = 0.0;
    const double* w = &weighted_[static_cast<size_t>(p) * order];
    for (int i = 0; i < order; ++i)
      part += w[i] * local[i];
    acc += panel * part;
    panel *= step;
  }
  return acc;
}

} // namespace deconv
