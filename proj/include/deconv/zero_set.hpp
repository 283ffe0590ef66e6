#pragma once

#include "deconv/error_model.hpp"

#include <cstdint>
#include <vector>

namespace deconv {

struct ZeroSetEntry
{
  double ell;
  cplx c_plus;
  cplx c_minus;
};

//! Translation lattice with its plus- and minus-side coefficients.
struct ZeroSetSequence
{
  std::vector<ZeroSetEntry> entries;
  double shift = 0.0;
  int n_cap = 0;
  //! Every ell up to this value has all of its index vectors inside the box.
  double complete_upto = 0.0;
  //! Grouping by exact integer keys (commensurable periods) or by tolerance.
  bool exact_grouping = true;
  //! Distinct index vectors merged only because their ells fell within tolerance.
  int near_coincidences = 0;
};

struct ZeroSetOptions
{
  std::uint64_t budget = 10'000'000;
  double group_tol = 1e-9;
};

//! binom(j + m - 1, m - 1); throws arithmetic_overflow beyond 64 bits.
std::uint64_t weak_composition_count(std::uint64_t j, std::uint64_t m);

ZeroSetSequence build_sequence(const std::vector<ZeroDatum>& zeros,
                               int n_cap,
                               const ZeroSetOptions& options = {});

ZeroSetSequence build_sequence(const ErrorModel& model,
                               int n_cap,
                               const ZeroSetOptions& options = {});

struct GrowthReport
{
  double partial_sum;
  double slope;
  double min_nu;
  double fit_lo;
  double fit_hi;
};

//! Fits log max|c| against log ell on [ell_lo, ell_hi]; defaults to the
//! upper decade of the range where the box truncation is complete.
GrowthReport growth_check(const ZeroSetSequence& seq,
                          double nu,
                          double ell_lo = 0.0,
                          double ell_hi = 0.0);

//! Coefficients q_0..q_{m-1} with
//! (1 - x)^m sum_{j <= N} C_{j,m} x^j = 1 - x^{N+1} sum_i q_i x^i.
std::vector<double> truncation_remainder(int m, int n_cap);

//! Largest cap N whose full enumeration fits the budget.
int max_cap_for_budget(int q, std::uint64_t budget);

} // namespace deconv
