#pragma once

#include <complex>
#include <vector>

namespace deconv {

//! C-infinity kernel on [-1, 1]: bump(t) times an even polynomial, with
//! vanishing moments of orders 1..k0.
class FlatKernel
{
public:
  FlatKernel(int k0, int max_deriv = 8);

  int k0() const { return k0_; }
  int max_deriv() const { return max_deriv_; }
  //! Coefficients of t^0, t^2, t^4, ... multiplying the bump.
  const std::vector<double>& coeffs() const { return coeffs_; }

  double eval(int order, double t) const;
  double operator()(double t) const { return eval(0, t); }
  //! Integral of K(t) e^{-z t}; adaptive composite quadrature.
  std::complex<double> laplace(std::complex<double> z) const;
  std::complex<double> fourier(double omega) const;

  double moment(int j) const;
  double norm2(int order) const;

private:
  int k0_;
  int max_deriv_;
  std::vector<double> coeffs_;
};

FlatKernel build_kernel(int k0);

//! exp(-1 / (1 - t^2)) on (-1, 1), zero elsewhere.
double bump(double t);

//! Fixed-node transform table for repeated evaluation of the kernel's
//! Laplace transform with |Im z| up to `max_frequency`.
class KernelTransform
{
public:
  KernelTransform(const FlatKernel& kernel, double max_frequency);
  std::complex<double> operator()(std::complex<double> z) const;

private:
  int panels_;
  double width_;
  std::vector<double> nodes_;
  std::vector<double> weighted_;
};

} // namespace deconv
