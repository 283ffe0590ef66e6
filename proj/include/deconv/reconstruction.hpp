#pragma once

#include "deconv/error_model.hpp"
#include "deconv/kernel.hpp"
#include "deconv/zero_set.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace deconv {

enum class BaseMode
{
  closed_form,
  fft
};

enum class Side
{
  plus,
  minus
};

struct FftOptions
{
  //! Relative level below which R_h counts as zero.
  double negligible = 1e-10;
  //! Relative spectral level treated as resolved.
  double spectral_tol = 1e-12;
  //! Relative bound on the cubic interpolation error.
  double interp_tol = 1e-9;
  int max_log2_size = 22;
};

//! The base function R_h whose translates make up the deconvolution kernel.
class BaseFunction
{
public:
  double h() const { return h_; }
  BaseMode mode() const { return mode_; }
  std::pair<double, double> support() const { return { lo_, hi_ }; }
  double operator()(double t) const;

  // grid data (fft mode)
  double grid_start() const { return t0_; }
  double grid_step() const { return dt_; }
  size_t grid_size() const { return values_.size(); }

private:
  friend BaseFunction base_closed_form(const ErrorModel&, const FlatKernel&, double);
  friend BaseFunction base_fft(const ErrorModel&,
                               const FlatKernel&,
                               double,
                               const FftOptions&);

  BaseFunction(const FlatKernel& kernel) : kernel_(kernel) {}

  double h_ = 0.0;
  BaseMode mode_ = BaseMode::closed_form;
  double lo_ = 0.0, hi_ = 0.0;

  // closed form: scale * K^{(order)}((t - center) / h)
  FlatKernel kernel_;
  int order_ = 0;
  double scale_ = 0.0;
  double center_ = 0.0;

  // fft: cubic Hermite on a uniform grid
  double t0_ = 0.0, dt_ = 0.0;
  std::vector<double> values_, slopes_;
};

//! Exact R_h for uniform convolutions and for lattice laws whose
//! non-vanishing factor is a pure exponential. Throws not_closed_form otherwise.
BaseFunction base_closed_form(const ErrorModel& model, const FlatKernel& kernel, double h);

//! R_h by discrete Fourier inversion.
BaseFunction base_fft(const ErrorModel& model,
                      const FlatKernel& kernel,
                      double h,
                      const FftOptions& options = {});

//! Closed form when available, FFT otherwise.
BaseFunction make_base(const ErrorModel& model, const FlatKernel& kernel, double h);

struct Translate
{
  double offset;
  double coef;
};

//! Truncated one-sided kernel: sum of coef * R_h(t - offset).
class DeconvolutionKernel
{
public:
  DeconvolutionKernel(ZeroSetSequence seq, BaseFunction base, Side side);

  Side side() const { return side_; }
  double h() const { return base_.h(); }
  int n_cap() const { return seq_.n_cap; }
  const ZeroSetSequence& sequence() const { return seq_; }
  const BaseFunction& base() const { return base_; }
  //! Sorted by offset.
  const std::vector<Translate>& translates() const { return translates_; }
  //! Imaginary mass dropped when the coefficients were made real.
  double imag_residual() const { return imag_residual_; }

  double operator()(double t) const;
  //! Sum over every translate, ignoring supports.
  double eval_direct(double t) const;
  //! Range of t where the kernel can be nonzero.
  std::pair<double, double> reach() const;

private:
  ZeroSetSequence seq_;
  BaseFunction base_;
  Side side_;
  std::vector<Translate> translates_;
  double imag_residual_ = 0.0;
};

DeconvolutionKernel build_deconvolution_kernel(const ZeroSetSequence& seq,
                                               const BaseFunction& base,
                                               Side side);

struct LineIntegralResult
{
  double value;
  double error_estimate;
  bool truncated;
};

//! Inverse Laplace transform of K(zh) / ghat(-z) along Re z = s. s > 0 gives
//! the plus-side kernel, s < 0 the minus side.
LineIntegralResult line_integral_kernel(const ErrorModel& model,
                                        const FlatKernel& kernel,
                                        double h,
                                        double s,
                                        double t,
                                        double tol = 1e-10);

using Density = std::function<double(double)>;

//! (1/h) int K((t - x0)/h) f(t) dt.
double smoothed_density(const FlatKernel& kernel, double h, const Density& f, double x0);

//! Bias left by cutting the translation series at N.
double truncation_term(const ErrorModel& model,
                       const FlatKernel& kernel,
                       double h,
                       int n_cap,
                       const Density& f,
                       double x0,
                       Side side);

//! int L(y - x0) f_Y(y) dy, translate by translate.
double kernel_expectation(const DeconvolutionKernel& L, const Density& f_obs, double x0);

} // namespace deconv
