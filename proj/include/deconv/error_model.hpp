#pragma once

#include <complex>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace deconv {

using cplx = std::complex<double>;

//! One vanishing factor (1 - e^{a z} / lambda)^m of the error transform.
struct ZeroDatum
{
  double a;
  cplx lambda;
  int m;
};

//! The non-vanishing part of the error transform, evaluated on the strip.
struct SmoothPart
{
  std::function<cplx(cplx)> laplace;
  //! Optional analytic derivative (order, z); finite differences otherwise.
  std::function<cplx(int, cplx)> derivative;
  double gamma = 0.0;
  double omega0 = 1.0;
  double d1 = 1.0;
  double d2 = 1.0;
  //! Location hint for the base function: psi(z) behaves like e^{shift z}.
  double shift = 0.0;
  int max_order = 6;
};

struct Strip
{
  double sigma_minus;
  double sigma_plus;
};

// Distribution laws known to the samplers and closed-form builders.
struct UniformLaw
{
  std::vector<double> thetas;
  std::vector<int> mults;
};

//! Mass probs[i] at step * (first_index + i).
struct DiscreteLaw
{
  double step;
  int first_index;
  std::vector<double> probs;
};

struct UniformGammaLaw
{
  double theta;
  double shape;
  double rate;
};

struct CustomLaw
{};

using ErrorLaw = std::variant<UniformLaw, DiscreteLaw, UniformGammaLaw, CustomLaw>;

struct DiscreteOptions
{
  double unit_tol = 1e-8;
  double cluster_tol = 1e-6;
};

//! Bound used in place of an infinite strip edge.
inline constexpr double strip_bound = 1e3;

class ErrorModel
{
public:
  ErrorModel(std::vector<ZeroDatum> zeros,
             SmoothPart smooth,
             Strip strip,
             std::string tag,
             ErrorLaw law = CustomLaw{});

  const std::vector<ZeroDatum>& zeros() const { return zeros_; }
  const SmoothPart& smooth() const { return smooth_; }
  const Strip& strip() const { return strip_; }
  const std::string& tag() const { return tag_; }
  const ErrorLaw& law() const { return law_; }
  double gamma() const { return smooth_.gamma; }

  //! Bilateral Laplace transform of the error law at complex z.
  cplx laplace(cplx z) const;
  //! Characteristic function in the paper's sign convention, ghat(i omega).
  cplx g_hat(double omega) const;
  cplx psi(double omega) const;
  cplx psi_derivative(int order, double omega) const;

  //! Sum of a_k m_k, the minus-side translation.
  double zero_shift() const;
  double min_period() const;
  //! True when the zero data are closed under conjugation.
  bool is_real() const;

private:
  cplx laplace_direct(cplx z) const;

  std::vector<ZeroDatum> zeros_;
  SmoothPart smooth_;
  Strip strip_;
  std::string tag_;
  ErrorLaw law_;
  bool removable_at_origin_ = false;
};

ErrorModel make_uniform(double theta);
ErrorModel make_uniform_convolution(const std::vector<double>& thetas,
                                    const std::vector<int>& mults);
//! Lattice law with probs[i] at step * (first_index + i).
ErrorModel make_discrete(double step,
                         const std::vector<double>& probs,
                         int first_index,
                         const DiscreteOptions& options = {});
//! Symmetric indexing -M..M for 2M+1 probabilities.
ErrorModel make_discrete(double step,
                         const std::vector<double>& probs,
                         const DiscreteOptions& options = {});
//! Binomial(m, 1/2) on {0, ..., m}.
ErrorModel make_binomial(int m);
//! Uniform(-theta, theta) convolved with Gamma(shape, rate).
ErrorModel make_uniform_smooth_convolution(double theta, double shape, double rate);

struct RootCluster
{
  cplx root;
  int multiplicity;
};

//! Roots of sum coeffs[i] x^i grouped by multiplicity.
std::vector<RootCluster> polynomial_root_clusters(const std::vector<double>& coeffs,
                                                  double cluster_tol = 1e-6);

} // namespace deconv
