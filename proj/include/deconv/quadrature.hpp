#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace deconv {

struct GaussRule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

//! Gauss-Legendre nodes and weights on [-1, 1].
GaussRule gauss_legendre(int n);

//! Cached rule; safe to call from several threads.
const GaussRule& cached_gauss_legendre(int n);

double integrate_gl(const std::function<double(double)>& f,
                    double a,
                    double b,
                    int n = 200);

//! Composite Gauss-Legendre over `panels` equal subintervals.
double integrate_panels(const std::function<double(double)>& f,
                        double a,
                        double b,
                        int panels,
                        int order = 20);

std::complex<double> integrate_panels(
  const std::function<std::complex<double>(double)>& f,
  double a,
  double b,
  int panels,
  int order = 20);

//! Adaptive Gauss-Kronrod (7/15) bisection with absolute tolerance.
double integrate_adaptive(const std::function<double(double)>& f,
                          double a,
                          double b,
                          double tol = 1e-12,
                          int max_depth = 30);

//! Compensated (Neumaier) accumulator; the result depends on add order only.
class NeumaierSum
{
public:
  void add(double x);
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

} // namespace deconv
