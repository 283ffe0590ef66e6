#include "deconv/error_model.hpp"
#include "deconv/errors.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace deconv {

namespace {

constexpr double pi = std::numbers::pi;
const cplx I(0.0, 1.0);

cplx int_pow(cplx x, int k)
{
  cplx r(1.0, 0.0);
  for (int i = 0; i < k; ++i)
    r *= x;
  return r;
}

double binom(int n, int k)
{
  double r = 1.0;
  for (int i = 1; i <= k; ++i)
    r = r * (n - k + i) / i;
  return r;
}

//! j-th derivative at z0 by the Cauchy integral on a circle of radius r.
cplx cauchy_derivative(const std::function<cplx(cplx)>& f, int j, cplx z0, double r)
{
  constexpr int points = 64;
  cplx acc = 0.0;
  for (int k = 0; k < points; ++k) {
    cplx e = std::polar(1.0, 2.0 * pi * k / points);
    acc += f(z0 + r * e) * std::pow(e, -j);
  }
  return std::tgamma(j + 1.0) * acc / (points * std::pow(r, j));
}

// Horner evaluation of the j-th derivative of sum c[i] x^i.
cplx poly_derivative(const std::vector<double>& c, int j, cplx x)
{
  int d = static_cast<int>(c.size()) - 1;
  cplx acc = 0.0;
  for (int i = d; i >= j; --i) {
    double f = 1.0;
    for (int t = 0; t < j; ++t)
      f *= (i - t);
    acc = acc * x + f * c[i];
  }
  return acc;
}

void check_positive(double v, const char* name)
{
  if (!(v > 0.0) || !std::isfinite(v))
    throw invalid_parameter(std::string(name) + " must be positive and finite");
}

} // namespace

ErrorModel::ErrorModel(std::vector<ZeroDatum> zeros,
                       SmoothPart smooth,
                       Strip strip,
                       std::string tag,
                       ErrorLaw law)
  : zeros_(std::move(zeros))
  , smooth_(std::move(smooth))
  , strip_(strip)
  , tag_(std::move(tag))
  , law_(std::move(law))
{
  if (!smooth_.laplace)
    throw invalid_parameter("smooth part needs a laplace transform");
  if (!(strip_.sigma_minus < 0.0 && strip_.sigma_plus > 0.0))
    throw invalid_parameter("strip must contain the imaginary axis");
  for (size_t i = 0; i < zeros_.size(); ++i) {
    const auto& d = zeros_[i];
    if (!(d.a > 0.0))
      throw invalid_parameter("zero datum: a must be positive");
    if (std::abs(std::abs(d.lambda) - 1.0) >= 1e-12)
      throw invalid_parameter("zero datum: lambda must have unit modulus");
    if (d.m < 1)
      throw invalid_parameter("zero datum: multiplicity must be positive");
    for (size_t j = 0; j < i; ++j)
      if (zeros_[j].a == d.a && zeros_[j].lambda == d.lambda)
        throw invalid_parameter("zero data must be pairwise distinct");
    if (d.lambda == cplx(1.0, 0.0))
      removable_at_origin_ = true;
  }
  cplx g0 = laplace(0.0);
  if (std::abs(g0 - 1.0) > 1e-10) {
    std::ostringstream msg;
    msg << tag_ << ": transform at the origin is " << g0 << ", expected 1";
    throw numerical_failure(msg.str());
  }
}

cplx ErrorModel::laplace_direct(cplx z) const
{
  cplx num = 1.0;
  for (const auto& d : zeros_)
    num *= int_pow(1.0 - std::exp(d.a * z) / d.lambda, d.m);
  return num / smooth_.laplace(z);
}

cplx ErrorModel::laplace(cplx z) const
{
  if (removable_at_origin_) {
    double amax = 0.0;
    for (const auto& d : zeros_)
      amax = std::max(amax, d.a);
    if (std::abs(z) * amax < 1e-6) {
      // mean value over a small circle recovers the analytic limit
      constexpr int points = 16;
      double r = 1e-3 / amax;
      cplx acc = 0.0;
      for (int k = 0; k < points; ++k)
        acc += laplace_direct(z + std::polar(r, 2.0 * pi * (k + 0.5) / points));
      return acc / static_cast<double>(points);
    }
  }
  return laplace_direct(z);
}

cplx ErrorModel::g_hat(double omega) const
{
  return laplace(I * omega);
}

cplx ErrorModel::psi(double omega) const
{
  return smooth_.laplace(I * omega);
}

cplx ErrorModel::psi_derivative(int order, double omega) const
{
  if (order < 0 || order > smooth_.max_order)
    throw unsupported_order("psi derivative order " + std::to_string(order) +
                            " exceeds maximum " +
                            std::to_string(smooth_.max_order));
  if (order == 0)
    return psi(omega);
  if (smooth_.derivative)
    return smooth_.derivative(order, I * omega);
  double step = 1e-5 * (1.0 + std::abs(omega));
  cplx acc = 0.0;
  for (int i = 0; i <= order; ++i) {
    double sign = (i % 2 == 0) ? 1.0 : -1.0;
    acc += sign * binom(order, i) * psi(omega + (0.5 * order - i) * step);
  }
  return int_pow(-I, order) * acc / std::pow(step, order);
}

double ErrorModel::zero_shift() const
{
  double s = 0.0;
  for (const auto& d : zeros_)
    s += d.a * d.m;
  return s;
}

double ErrorModel::min_period() const
{
  double a = std::numeric_limits<double>::infinity();
  for (const auto& d : zeros_)
    a = std::min(a, d.a);
  return a;
}

bool ErrorModel::is_real() const
{
  for (const auto& d : zeros_) {
    bool found = false;
    for (const auto& e : zeros_)
      if (e.a == d.a && e.m == d.m && std::abs(e.lambda - std::conj(d.lambda)) < 1e-12)
        found = true;
    if (!found)
      return false;
  }
  return true;
}

ErrorModel make_uniform(double theta)
{
  check_positive(theta, "theta");
  auto model = make_uniform_convolution({ theta }, { 1 });
  return ErrorModel(model.zeros(),
                    model.smooth(),
                    model.strip(),
                    "uniform(" + std::to_string(theta) + ")",
                    model.law());
}

ErrorModel make_uniform_convolution(const std::vector<double>& thetas,
                                    const std::vector<int>& mults)
{
  if (thetas.empty() || thetas.size() != mults.size())
    throw invalid_parameter("thetas and mults must be nonempty and of equal length");
  std::vector<ZeroDatum> zeros;
  cplx scale = 1.0;
  double shift = 0.0;
  int gamma = 0;
  double bound = 1.0;
  for (size_t k = 0; k < thetas.size(); ++k) {
    check_positive(thetas[k], "theta");
    if (mults[k] < 1)
      throw invalid_parameter("multiplicities must be positive");
    for (size_t j = 0; j < k; ++j)
      if (thetas[j] == thetas[k])
        throw invalid_parameter("thetas must be distinct");
    zeros.push_back({ 2.0 * thetas[k], 1.0, mults[k] });
    scale *= int_pow(-2.0 * thetas[k], mults[k]);
    bound *= std::pow(2.0 * thetas[k], mults[k]);
    shift += thetas[k] * mults[k];
    gamma += mults[k];
  }
  SmoothPart smooth;
  smooth.laplace = [scale, shift, gamma](cplx z) {
    return scale * int_pow(z, gamma) * std::exp(shift * z);
  };
  smooth.derivative = [scale, shift, gamma](int j, cplx z) {
    cplx acc = 0.0;
    for (int i = 0; i <= std::min(j, gamma); ++i) {
      double falling = 1.0;
      for (int t = 0; t < i; ++t)
        falling *= (gamma - t);
      acc += binom(j, i) * falling * int_pow(z, gamma - i) *
             std::pow(shift, j - i);
    }
    return scale * acc * std::exp(shift * z);
  };
  smooth.gamma = gamma;
  smooth.omega0 = 1.0;
  smooth.d1 = bound;
  smooth.d2 = bound;
  smooth.shift = shift;

  std::ostringstream tag;
  tag << "uniform_convolution(";
  for (size_t k = 0; k < thetas.size(); ++k)
    tag << (k ? "," : "") << thetas[k] << "^" << mults[k];
  tag << ")";
  return ErrorModel(std::move(zeros),
                    std::move(smooth),
                    { -strip_bound, strip_bound },
                    tag.str(),
                    UniformLaw{ thetas, mults });
}

std::vector<RootCluster> polynomial_root_clusters(const std::vector<double>& coeffs,
                                                  double cluster_tol)
{
  int degree = static_cast<int>(coeffs.size()) - 1;
  while (degree > 0 && coeffs[degree] == 0.0)
    --degree;
  if (degree <= 0)
    return {};
  std::vector<double> c(coeffs.begin(), coeffs.begin() + degree + 1);

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i)
    companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i)
    companion(i, degree - 1) = -c[i] / c[degree];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success)
    throw numerical_failure("companion eigenvalue iteration did not converge");
  std::vector<cplx> roots(solver.eigenvalues().data(),
                          solver.eigenvalues().data() + degree);

  double norm1 = 0.0;
  for (double v : c)
    norm1 += std::abs(v / c[degree]);
  const double eps = std::numeric_limits<double>::epsilon();

  std::vector<RootCluster> clusters;
  std::vector<cplx> remaining = roots;
  while (!remaining.empty()) {
    cplx seed = remaining.front();
    std::vector<size_t> order(remaining.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
      return std::abs(remaining[i] - seed) < std::abs(remaining[j] - seed);
    });
    int chosen = 1;
    cplx center = seed;
    for (int k = static_cast<int>(remaining.size()); k >= 2; --k) {
      cplx mean = 0.0;
      for (int i = 0; i < k; ++i)
        mean += remaining[order[i]];
      mean /= static_cast<double>(k);
      double radius = std::max(cluster_tol, 50.0 * std::pow(eps * norm1, 1.0 / k)) *
                      std::max(1.0, std::abs(mean));
      double spread = 0.0;
      for (int i = 0; i < k; ++i)
        spread = std::max(spread, std::abs(remaining[order[i]] - mean));
      if (spread > radius)
        continue;
      // a genuine k-fold root makes the lower Taylor coefficients vanish
      double lead = std::abs(poly_derivative(c, k, mean)) / std::tgamma(k + 1.0);
      double rho = std::max(spread, eps);
      bool ok = true;
      for (int j = 0; j < k && ok; ++j) {
        double coef = std::abs(poly_derivative(c, j, mean)) / std::tgamma(j + 1.0);
        double allowed = 1e3 * (std::pow(rho, k - j) * lead + eps * norm1);
        ok = coef <= allowed;
      }
      if (ok) {
        chosen = k;
        center = mean;
        break;
      }
    }
    // Newton on the (k-1)-th derivative, which has a simple root here
    for (int iter = 0; iter < 8; ++iter) {
      cplx q = poly_derivative(c, chosen - 1, center);
      cplx dq = poly_derivative(c, chosen, center);
      if (dq == 0.0)
        break;
      cplx next = center - q / dq;
      if (std::abs(poly_derivative(c, chosen - 1, next)) >= std::abs(q))
        break;
      center = next;
    }
    clusters.push_back({ center, chosen });
    std::vector<cplx> rest;
    for (size_t i = chosen; i < order.size(); ++i)
      rest.push_back(remaining[order[i]]);
    remaining = std::move(rest);
  }
  return clusters;
}

ErrorModel make_discrete(double step,
                         const std::vector<double>& probs,
                         int first_index,
                         const DiscreteOptions& options)
{
  check_positive(step, "support step");
  if (probs.empty())
    throw invalid_parameter("discrete law needs probabilities");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0))
      throw invalid_parameter("probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw invalid_parameter("probabilities must sum to 1");
  if (probs.back() == 0.0)
    throw invalid_parameter("top probability must be nonzero");
  size_t lead = 0;
  while (probs[lead] == 0.0)
    ++lead;
  std::vector<double> q(probs.begin() + lead, probs.end());
  int first = first_index + static_cast<int>(lead);
  int degree = static_cast<int>(q.size()) - 1;
  int top = first + degree;
  double p_top = q[degree];

  std::vector<double> coeffs(degree + 1);
  for (int i = 0; i <= degree; ++i)
    coeffs[i] = q[degree - i] / p_top;
  auto clusters = polynomial_root_clusters(coeffs, options.cluster_tol);

  std::vector<ZeroDatum> zeros;
  std::vector<RootCluster> off_circle;
  double sigma_minus = -strip_bound, sigma_plus = strip_bound;
  for (const auto& cl : clusters) {
    double modulus = std::abs(cl.root);
    if (std::abs(modulus - 1.0) <= options.unit_tol) {
      cplx lambda = cl.root / modulus;
      if (std::abs(lambda.imag()) < 1e-12)
        lambda = cplx(lambda.real() > 0 ? 1.0 : -1.0, 0.0);
      zeros.push_back({ step, lambda, cl.multiplicity });
    } else {
      off_circle.push_back(cl);
      double edge = std::log(modulus) / step;
      if (edge < 0)
        sigma_minus = std::max(sigma_minus, edge);
      else
        sigma_plus = std::min(sigma_plus, edge);
    }
  }
  std::sort(zeros.begin(), zeros.end(), [](const ZeroDatum& x, const ZeroDatum& y) {
    return std::arg(x.lambda) < std::arg(y.lambda);
  });

  SmoothPart smooth;
  smooth.laplace = [step, top, p_top, off_circle](cplx z) {
    cplx denom = p_top;
    cplx e = std::exp(step * z);
    for (const auto& cl : off_circle)
      denom *= int_pow(1.0 - e / cl.root, cl.multiplicity);
    return std::exp(step * top * z) / denom;
  };
  double radius = 0.5 * std::min({ 1.0, -sigma_minus, sigma_plus });
  auto laplace = smooth.laplace;
  smooth.derivative = [laplace, radius](int j, cplx z) {
    return cauchy_derivative(laplace, j, z, radius);
  };
  smooth.gamma = 0.0;
  smooth.omega0 = 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int i = 0; i < 4096; ++i) {
    double v = std::abs(laplace(I * (2.0 * pi / step) * (i / 4096.0)));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  smooth.d1 = lo;
  smooth.d2 = hi;
  smooth.shift = step * top;

  std::ostringstream tag;
  tag << "discrete(step=" << step << ",first=" << first << ",n=" << q.size() << ")";
  return ErrorModel(std::move(zeros),
                    std::move(smooth),
                    { sigma_minus, sigma_plus },
                    tag.str(),
                    DiscreteLaw{ step, first, q });
}

ErrorModel make_discrete(double step,
                         const std::vector<double>& probs,
                         const DiscreteOptions& options)
{
  if (probs.size() % 2 == 0)
    throw invalid_parameter("symmetric indexing needs an odd number of probabilities");
  return make_discrete(step, probs, -static_cast<int>(probs.size() / 2), options);
}

ErrorModel make_binomial(int m)
{
  if (m < 1)
    throw invalid_parameter("binomial size must be positive");
  std::vector<double> probs(m + 1);
  for (int k = 0; k <= m; ++k)
    probs[k] = binom(m, k) * std::ldexp(1.0, -m);
  auto model = make_discrete(1.0, probs, 0);
  return ErrorModel(model.zeros(),
                    model.smooth(),
                    model.strip(),
                    "binomial(" + std::to_string(m) + ")",
                    model.law());
}

ErrorModel make_uniform_smooth_convolution(double theta, double shape, double rate)
{
  check_positive(theta, "theta");
  check_positive(shape, "gamma shape");
  check_positive(rate, "gamma rate");
  SmoothPart smooth;
  double scale = -2.0 * theta * std::pow(rate, -shape);
  smooth.laplace = [scale, theta, shape, rate](cplx z) {
    return scale * z * std::exp(theta * z) * std::pow(z + rate, shape);
  };
  auto laplace = smooth.laplace;
  double radius = 0.5 * std::min(1.0, rate);
  smooth.derivative = [laplace, radius](int j, cplx z) {
    return cauchy_derivative(laplace, j, z, radius);
  };
  smooth.gamma = 1.0 + shape;
  smooth.omega0 = 1.0;
  smooth.d1 = 2.0 * theta * std::pow(rate, -shape);
  smooth.d2 = smooth.d1 * std::pow(1.0 + rate * rate, shape / 2.0);
  smooth.shift = theta;

  std::ostringstream tag;
  tag << "uniform_gamma(" << theta << "," << shape << "," << rate << ")";
  return ErrorModel({ { 2.0 * theta, 1.0, 1 } },
                    std::move(smooth),
                    { -rate, strip_bound },
                    tag.str(),
                    UniformGammaLaw{ theta, shape, rate });
}

} // namespace deconv
