#include "deconv/reconstruction.hpp"
#include "deconv/errors.hpp"
#include "deconv/quadrature.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace deconv {

namespace {

constexpr double pi = std::numbers::pi;
const cplx I(0.0, 1.0);

size_t next_pow2(double x)
{
  size_t n = 1;
  while (static_cast<double>(n) < x)
    n <<= 1;
  return n;
}

int total_multiplicity(const ErrorModel& model)
{
  int total = 0;
  for (const auto& d : model.zeros())
    total += d.m;
  return total;
}

} // namespace

double BaseFunction::operator()(double t) const
{
  if (t < lo_ || t > hi_)
    return 0.0;
  if (mode_ == BaseMode::closed_form)
    return scale_ * kernel_.eval(order_, (t - center_) / h_);
  double u = (t - t0_) / dt_;
  auto i = static_cast<long>(std::floor(u));
  long last = static_cast<long>(values_.size()) - 1;
  if (i < 0 || i >= last)
    return (i == last && u == static_cast<double>(last)) ? values_.back() : 0.0;
  double s = u - static_cast<double>(i);
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * values_[i] + h10 * dt_ * slopes_[i] + h01 * values_[i + 1] +
         h11 * dt_ * slopes_[i + 1];
}

BaseFunction base_closed_form(const ErrorModel& model, const FlatKernel& kernel, double h)
{
  if (!(h > 0))
    throw invalid_parameter("bandwidth must be positive");
  BaseFunction base(kernel);
  base.h_ = h;
  base.mode_ = BaseMode::closed_form;
  if (const auto* law = std::get_if<UniformLaw>(&model.law())) {
    double scale = 1.0, center = 0.0;
    int order = 0;
    for (size_t k = 0; k < law->thetas.size(); ++k) {
      scale *= std::pow(2.0 * law->thetas[k], law->mults[k]);
      center += law->thetas[k] * law->mults[k];
      order += law->mults[k];
    }
    if (order > kernel.max_deriv())
      throw unsupported_order("closed form needs kernel derivative of order " +
                              std::to_string(order));
    base.order_ = order;
    base.scale_ = scale * std::pow(h, -(order + 1));
    base.center_ = center;
  } else if (const auto* law = std::get_if<DiscreteLaw>(&model.law())) {
    int degree = static_cast<int>(law->probs.size()) - 1;
    if (total_multiplicity(model) != degree)
      throw not_closed_form("lattice law has roots off the unit circle");
    base.order_ = 0;
    base.scale_ = 1.0 / (law->probs.back() * h);
    base.center_ = law->step * (law->first_index + degree);
  } else {
    throw not_closed_form("no closed form for " + model.tag());
  }
  base.lo_ = base.center_ - h;
  base.hi_ = base.center_ + h;
  return base;
}

BaseFunction base_fft(const ErrorModel& model,
                      const FlatKernel& kernel,
                      double h,
                      const FftOptions& options)
{
  if (!(h > 0))
    throw invalid_parameter("bandwidth must be positive");
  const double center = model.smooth().shift;
  // psi(-i w) with the translation e^{-i w center} taken out
  auto reduced = [&](double w) { return model.psi(-w) * std::exp(I * w * center); };

  // cutoff from the analytic transform: last frequency where the product
  // is above spectral_tol of its peak
  const double band_max = 2000.0;
  KernelTransform transform(kernel, band_max);
  double peak = 0.0, cutoff = 0.0, fourth = 0.0;
  const double dw = 0.25 / h;
  std::vector<double> mags;
  for (double w = 0.0; w * h <= band_max; w += dw) {
    cplx k = transform(cplx(0.0, w * h));
    // below 1e-15 the kernel transform is quadrature noise
    double mag = std::abs(k) < 1e-15 ? 0.0 : std::abs(k * reduced(w));
    if (!std::isfinite(mag))
      throw numerical_failure("non-finite spectrum in R_h inversion");
    mags.push_back(mag);
    peak = std::max(peak, mag);
  }
  for (size_t i = 0; i < mags.size(); ++i) {
    double w = static_cast<double>(i) * dw;
    if (mags[i] > options.spectral_tol * peak)
      cutoff = w + dw;
    fourth += std::pow(w, 4) * mags[i] * dw / pi;
  }
  if (cutoff * h >= band_max - 1.0)
    throw numerical_failure("K(i w h) psi(-i w) still above tolerance at w h = " +
                            std::to_string(band_max) + "; is gamma declared correctly?");

  double decay = std::min(-model.strip().sigma_minus, model.strip().sigma_plus);
  double tail = decay < strip_bound ? 36.0 / decay : 0.0;
  double half_width = h + tail + 1.0;
  double dt = std::min(h / 16.0, pi / (1.5 * cutoff));
  Eigen::FFT<double> fft;

  for (int attempt = 0; attempt < 64; ++attempt) {
    size_t n = next_pow2(2.0 * half_width / dt);
    if (n > (size_t{ 1 } << options.max_log2_size))
      throw numerical_failure("R_h grid exceeds 2^" +
                              std::to_string(options.max_log2_size) + " points");
    dt = 2.0 * half_width / static_cast<double>(n);
    double period = dt * static_cast<double>(n);
    long half = static_cast<long>(n / 2);

    // samples of K_h on t_j = j dt in wrapped order
    std::vector<cplx> samples(n), spectrum;
    for (long j = -half; j < half; ++j) {
      double t = j * dt;
      size_t idx = static_cast<size_t>(j < 0 ? j + static_cast<long>(n) : j);
      samples[idx] = (std::abs(t) < h) ? kernel(t / h) / h : 0.0;
    }
    fft.fwd(spectrum, samples);

    std::vector<double> omega(n);
    for (size_t k = 0; k < n; ++k) {
      long kk = static_cast<long>(k) < half ? static_cast<long>(k)
                                             : static_cast<long>(k) - static_cast<long>(n);
      omega[k] = 2.0 * pi * static_cast<double>(kk) / period;
      if (std::abs(omega[k]) > cutoff)
        spectrum[k] = 0.0;
      else
        spectrum[k] *= reduced(omega[k]);
    }

    std::vector<cplx> deriv_spec(n), values, slopes;
    for (size_t k = 0; k < n; ++k)
      deriv_spec[k] = I * omega[k] * spectrum[k];
    fft.inv(values, spectrum);
    fft.inv(slopes, deriv_spec);
    // dt of the forward sum cancels against 1/period
    double vmax = 0.0, imag = 0.0;
    for (auto& v : values) {
      vmax = std::max(vmax, std::abs(v.real()));
      imag = std::max(imag, std::abs(v.imag()));
    }
    if (vmax == 0.0)
      throw numerical_failure("R_h inversion produced a zero function");
    if (model.is_real() && imag > 1e-8 * vmax)
      throw numerical_failure("R_h inversion is not real");

    // wrap-around: the outer tenth of the window must be negligible
    double edge = 0.0;
    for (long j = -half; j < half; ++j)
      if (std::abs(j) > 0.9 * half) {
        size_t idx = static_cast<size_t>(j < 0 ? j + static_cast<long>(n) : j);
        edge = std::max(edge, std::abs(values[idx].real()));
      }
    if (edge > options.negligible * vmax) {
      half_width *= 2.0;
      continue;
    }
    // cubic Hermite error is at most dt^4 max|R''''| / 384
    double interp = std::pow(dt, 4) * fourth / 384.0;
    if (interp > options.interp_tol * vmax) {
      dt /= 2.0;
      continue;
    }

    BaseFunction base(kernel);
    base.h_ = h;
    base.mode_ = BaseMode::fft;
    base.dt_ = dt;
    base.t0_ = center - half * dt;
    base.values_.resize(n);
    base.slopes_.resize(n);
    for (long j = -half; j < half; ++j) {
      size_t idx = static_cast<size_t>(j < 0 ? j + static_cast<long>(n) : j);
      base.values_[j + half] = values[idx].real();
      base.slopes_[j + half] = slopes[idx].real();
    }
    long first = 0, last = static_cast<long>(n) - 1;
    double cut = options.negligible * vmax;
    while (first < last && std::abs(base.values_[first]) <= cut)
      ++first;
    while (last > first && std::abs(base.values_[last]) <= cut)
      --last;
    base.lo_ = base.t0_ + std::max(first - 1, 0L) * dt;
    base.hi_ = base.t0_ + std::min(last + 1, static_cast<long>(n) - 1) * dt;
    return base;
  }
  throw numerical_failure("R_h inversion did not converge");
}

BaseFunction make_base(const ErrorModel& model, const FlatKernel& kernel, double h)
{
  try {
    return base_closed_form(model, kernel, h);
  } catch (const not_closed_form&) {
    return base_fft(model, kernel, h);
  }
}

DeconvolutionKernel::DeconvolutionKernel(ZeroSetSequence seq, BaseFunction base, Side side)
  : seq_(std::move(seq))
  , base_(std::move(base))
  , side_(side)
{
  for (const auto& e : seq_.entries) {
    cplx c = side_ == Side::plus ? e.c_plus : e.c_minus;
    double offset = side_ == Side::plus ? e.ell : -(seq_.shift + e.ell);
    imag_residual_ = std::max(imag_residual_, std::abs(c.imag()));
    translates_.push_back({ offset, c.real() });
  }
  std::stable_sort(translates_.begin(),
                   translates_.end(),
                   [](const Translate& x, const Translate& y) { return x.offset < y.offset; });
}

double DeconvolutionKernel::operator()(double t) const
{
  auto [lo, hi] = base_.support();
  // translates with lo <= t - offset <= hi
  auto first = std::lower_bound(translates_.begin(),
                                translates_.end(),
                                t - hi,
                                [](const Translate& x, double v) { return x.offset < v; });
  double acc = 0.0;
  for (auto it = first; it != translates_.end() && it->offset <= t - lo; ++it)
    acc += it->coef * base_(t - it->offset);
  return acc;
}

double DeconvolutionKernel::eval_direct(double t) const
{
  double acc = 0.0;
  for (const auto& tr : translates_)
    acc += tr.coef * base_(t - tr.offset);
  return acc;
}

std::pair<double, double> DeconvolutionKernel::reach() const
{
  auto [lo, hi] = base_.support();
  return { translates_.front().offset + lo, translates_.back().offset + hi };
}

DeconvolutionKernel build_deconvolution_kernel(const ZeroSetSequence& seq,
                                               const BaseFunction& base,
                                               Side side)
{
  return DeconvolutionKernel(seq, base, side);
}

LineIntegralResult line_integral_kernel(const ErrorModel& model,
                                        const FlatKernel& kernel,
                                        double h,
                                        double s,
                                        double t,
                                        double tol)
{
  if (s == 0.0)
    throw invalid_parameter("contour abscissa must be nonzero");
  if (!(s > -model.strip().sigma_plus && s < -model.strip().sigma_minus))
    throw invalid_parameter("contour abscissa outside the zero-free strip");
  if (!(h > 0))
    throw invalid_parameter("bandwidth must be positive");

  const double omega_max = 1600.0 / h;
  // tables sized to the frequency band they serve
  std::vector<KernelTransform> tables;
  for (double band = 50.0; band <= 1600.0; band *= 2.0)
    tables.emplace_back(kernel, band);
  auto integrand = [&](double w) {
    cplx z(s, w);
    double band = std::abs(w) * h;
    size_t tier = 0;
    while (tier + 1 < tables.size() && 50.0 * std::ldexp(1.0, static_cast<int>(tier)) < band)
      ++tier;
    return tables[tier](z * h) / model.laplace(-z) * std::exp(z * t);
  };
  double panel = std::min(1.0, 2.0 / (1.0 + std::abs(t)));
  NeumaierSum acc;
  double peak = 0.0, last_panels = 0.0;
  bool truncated = true;
  const auto& rule = cached_gauss_legendre(20);
  int quiet = 0;
  for (double a = 0.0; a < omega_max; a += panel) {
    double part = 0.0, env = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      double w = a + 0.5 * panel * (rule.nodes[i] + 1.0);
      cplx v = integrand(w);
      part += 0.5 * panel * rule.weights[i] * v.real();
      env = std::max(env, std::abs(v));
    }
    acc.add(part);
    peak = std::max(peak, env);
    last_panels = env;
    quiet = env < tol * peak ? quiet + 1 : 0;
    if (quiet >= 20) {
      truncated = false;
      break;
    }
  }
  double estimate = last_panels * omega_max / pi;
  return { acc.value() / pi, truncated ? estimate : last_panels * panel / pi, truncated };
}

double smoothed_density(const FlatKernel& kernel, double h, const Density& f, double x0)
{
  std::function<double(double)> integrand = [&](double t) {
    return kernel((t - x0) / h) * f(t) / h;
  };
  return integrate_panels(integrand, x0 - h, x0 + h, 4, 50);
}

double truncation_term(const ErrorModel& model,
                       const FlatKernel& kernel,
                       double h,
                       int n_cap,
                       const Density& f,
                       double x0,
                       Side side)
{
  // per coordinate: the kept factor 1, or -q_i lambda^{-+(N+1+i)} at shift
  // +-a (N+1+i)
  struct Option
  {
    cplx coef;
    double shift;
  };
  std::vector<std::vector<Option>> options;
  for (const auto& d : model.zeros()) {
    auto q = truncation_remainder(d.m, n_cap);
    std::vector<Option> opts{ { 1.0, 0.0 } };
    for (int i = 0; i < d.m; ++i) {
      int power = n_cap + 1 + i;
      if (side == Side::plus)
        opts.push_back({ -q[i] * std::pow(d.lambda, -power), d.a * power });
      else
        opts.push_back({ -q[i] * std::pow(d.lambda, power), -d.a * power });
    }
    options.push_back(std::move(opts));
  }
  size_t dims = options.size();
  std::vector<size_t> index(dims, 0);
  cplx total = 0.0;
  while (true) {
    size_t pos = 0;
    while (pos < dims && ++index[pos] == options[pos].size())
      index[pos++] = 0;
    if (pos == dims)
      break;
    cplx coef = 1.0;
    double shift = 0.0;
    for (size_t k = 0; k < dims; ++k) {
      coef *= options[k][index[k]].coef;
      shift += options[k][index[k]].shift;
    }
    total += coef * smoothed_density(kernel, h, f, x0 + shift);
  }
  return total.real();
}

double kernel_expectation(const DeconvolutionKernel& L, const Density& f_obs, double x0)
{
  auto [lo, hi] = L.base().support();
  int panels = std::max(2, static_cast<int>(std::ceil((hi - lo) / L.h())) * 2);
  NeumaierSum acc;
  for (const auto& tr : L.translates()) {
    double a = x0 + tr.offset + lo, b = x0 + tr.offset + hi;
    std::function<double(double)> integrand = [&](double y) {
      return L.base()(y - x0 - tr.offset) * f_obs(y);
    };
    acc.add(tr.coef * integrate_panels(integrand, a, b, panels, 40));
  }
  return acc.value();
}

} // namespace deconv
