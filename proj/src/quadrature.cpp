#include "deconv/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace deconv {

GaussRule gauss_legendre(int n)
{
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    // recompute the derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1)
    rule.nodes[n / 2] = 0.0;
  return rule;
}

const GaussRule& cached_gauss_legendre(int n)
{
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

double integrate_gl(const std::function<double(double)>& f,
                    double a,
                    double b,
                    int n)
{
  const auto& rule = cached_gauss_legendre(n);
  double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  NeumaierSum acc;
  for (int i = 0; i < n; ++i)
    acc.add(rule.weights[i] * f(mid + half * rule.nodes[i]));
  return half * acc.value();
}

double integrate_panels(const std::function<double(double)>& f,
                        double a,
                        double b,
                        int panels,
                        int order)
{
  double width = (b - a) / panels;
  NeumaierSum acc;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * width;
    acc.add(integrate_gl(f, lo, lo + width, order));
  }
  return acc.value();
}

std::complex<double> integrate_panels(
  const std::function<std::complex<double>(double)>& f,
  double a,
  double b,
  int panels,
  int order)
{
  const auto& rule = cached_gauss_legendre(order);
  double width = (b - a) / panels;
  NeumaierSum re, im;
  for (int p = 0; p < panels; ++p) {
    double mid = a + (p + 0.5) * width;
    for (int i = 0; i < order; ++i) {
      auto v = rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
      re.add(v.real());
      im.add(v.imag());
    }
  }
  return 0.5 * width * std::complex<double>(re.value(), im.value());
}

namespace {

constexpr double kronrod_nodes[8] = {
  0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
  0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
  0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
  0.207784955007898467600689403773245, 0.000000000000000000000000000000000
};
constexpr double kronrod_weights[8] = {
  0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
  0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
  0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
  0.204432940075298892414161999234649, 0.209482141084727828012999174891714
};
constexpr double gauss_weights[4] = { 0.129484966168869693270611432679082,
                                      0.279705391489276667901467771423780,
                                      0.381830050505118944950369775488975,
                                      0.417959183673469387755102040816327 };

void gk15(const std::function<double(double)>& f,
          double a,
          double b,
          double& result,
          double& error)
{
  double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double fc = f(mid);
  double kronrod = fc * kronrod_weights[7];
  double gauss = fc * gauss_weights[3];
  for (int i = 0; i < 7; ++i) {
    double dx = half * kronrod_nodes[i];
    double s = f(mid - dx) + f(mid + dx);
    kronrod += kronrod_weights[i] * s;
    if (i % 2 == 1)
      gauss += gauss_weights[i / 2] * s;
  }
  result = kronrod * half;
  error = std::abs((kronrod - gauss) * half);
}

double adaptive_step(const std::function<double(double)>& f,
                     double a,
                     double b,
                     double tol,
                     int depth)
{
  double result, error;
  gk15(f, a, b, result, error);
  if (error <= tol || error <= 1e-14 * std::abs(result) || depth <= 0)
    return result;
  double mid = 0.5 * (a + b);
  return adaptive_step(f, a, mid, 0.5 * tol, depth - 1) +
         adaptive_step(f, mid, b, 0.5 * tol, depth - 1);
}

} // namespace

double integrate_adaptive(const std::function<double(double)>& f,
                          double a,
                          double b,
                          double tol,
                          int max_depth)
{
  return adaptive_step(f, a, b, tol, max_depth);
}

void NeumaierSum::add(double x)
{
  double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

} // namespace deconv
