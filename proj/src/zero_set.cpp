#include "deconv/zero_set.hpp"
#include "deconv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace deconv {

std::uint64_t weak_composition_count(std::uint64_t j, std::uint64_t m)
{
  if (m == 0)
    throw invalid_parameter("weak compositions need at least one part");
  std::uint64_t k = std::min<std::uint64_t>(m - 1, j);
  std::uint64_t n = j + m - 1;
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i);
    r /= i;
    if (r > std::numeric_limits<std::uint64_t>::max())
      throw arithmetic_overflow("weak composition count exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(r);
}

int max_cap_for_budget(int q, std::uint64_t budget)
{
  if (q == 0)
    return std::numeric_limits<int>::max();
  double side = std::pow(static_cast<double>(budget) / q, 1.0 / q);
  int n = static_cast<int>(std::floor(side)) - 1;
  while (n > 0 && q * std::pow(n + 1.0, q) > static_cast<double>(budget))
    --n;
  while (q * std::pow(n + 2.0, q) <= static_cast<double>(budget))
    ++n;
  return std::max(n, 0);
}

std::vector<double> truncation_remainder(int m, int n_cap)
{
  if (m < 1 || n_cap < 0)
    throw invalid_parameter("remainder needs m >= 1 and N >= 0");
  std::vector<double> q(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0, binom = 1.0;
    for (int t = 0; t <= i; ++t) {
      double c = static_cast<double>(weak_composition_count(n_cap + 1 + i - t, m));
      acc += ((t % 2) ? -binom : binom) * c;
      binom = binom * (m - t) / (t + 1);
    }
    q[i] = acc;
  }
  return q;
}

namespace {

struct Tables
{
  std::vector<std::vector<cplx>> plus, minus;
};

// per-coordinate factors C_{j,m} lambda^{-j} and (-1)^m C_{j,m} lambda^{j+m}
Tables coordinate_tables(const std::vector<ZeroDatum>& zeros, int n_cap)
{
  Tables t;
  for (const auto& d : zeros) {
    std::vector<cplx> p(n_cap + 1), m(n_cap + 1);
    cplx inv = 1.0 / d.lambda;
    cplx up = 1.0, down = 1.0;
    cplx lead = 1.0;
    for (int i = 0; i < d.m; ++i)
      lead *= -d.lambda;
    for (int j = 0; j <= n_cap; ++j) {
      double c = static_cast<double>(weak_composition_count(j, d.m));
      p[j] = c * down;
      m[j] = lead * c * up;
      down *= inv;
      up *= d.lambda;
    }
    t.plus.push_back(std::move(p));
    t.minus.push_back(std::move(m));
  }
  return t;
}

struct Commensurable
{
  double unit;
  std::vector<std::int64_t> multiples;
};

std::optional<std::pair<std::int64_t, std::int64_t>> rational_approx(double x)
{
  // continued fraction with bounded denominators
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double v = x;
  for (int iter = 0; iter < 40; ++iter) {
    double fl = std::floor(v);
    auto a = static_cast<std::int64_t>(fl);
    std::int64_t h2 = a * h1 + h0, k2 = a * k1 + k0;
    if (k2 > 10000)
      break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    if (std::abs(x - static_cast<double>(h1) / k1) <= 1e-12 * std::abs(x))
      return std::make_pair(h1, k1);
    double frac = v - fl;
    if (frac < 1e-15)
      break;
    v = 1.0 / frac;
  }
  return std::nullopt;
}

std::optional<Commensurable> commensurable(const std::vector<ZeroDatum>& zeros)
{
  std::vector<std::int64_t> num, den;
  for (const auto& d : zeros) {
    auto r = rational_approx(d.a / zeros.front().a);
    if (!r)
      return std::nullopt;
    num.push_back(r->first);
    den.push_back(r->second);
  }
  std::int64_t l = 1;
  for (auto q : den) {
    l = std::lcm(l, q);
    if (l > 1'000'000)
      return std::nullopt;
  }
  std::vector<std::int64_t> mult;
  std::int64_t g = 0;
  for (size_t k = 0; k < num.size(); ++k) {
    mult.push_back(num[k] * (l / den[k]));
    g = std::gcd(g, mult.back());
  }
  for (auto& v : mult)
    v /= g;
  return Commensurable{ zeros.front().a * g / l, mult };
}

ZeroSetSequence by_convolution(const std::vector<ZeroDatum>& zeros,
                               int n_cap,
                               const Tables& tables,
                               const Commensurable& grid)
{
  std::vector<cplx> plus{ 1.0 }, minus{ 1.0 };
  std::vector<char> hit{ 1 };
  for (size_t k = 0; k < zeros.size(); ++k) {
    std::int64_t step = grid.multiples[k];
    size_t len = plus.size() + static_cast<size_t>(step * n_cap);
    std::vector<cplx> np(len, 0.0), nm(len, 0.0);
    std::vector<char> nh(len, 0);
    for (size_t i = 0; i < plus.size(); ++i) {
      if (!hit[i])
        continue;
      for (int j = 0; j <= n_cap; ++j) {
        size_t idx = i + static_cast<size_t>(step * j);
        np[idx] += plus[i] * tables.plus[k][j];
        nm[idx] += minus[i] * tables.minus[k][j];
        nh[idx] = 1;
      }
    }
    plus = std::move(np);
    minus = std::move(nm);
    hit = std::move(nh);
  }
  ZeroSetSequence seq;
  for (size_t i = 0; i < plus.size(); ++i)
    if (hit[i])
      seq.entries.push_back({ grid.unit * static_cast<double>(i), plus[i], minus[i] });
  seq.exact_grouping = true;
  return seq;
}

ZeroSetSequence by_enumeration(const std::vector<ZeroDatum>& zeros,
                               int n_cap,
                               const Tables& tables,
                               double group_tol)
{
  size_t q = zeros.size();
  std::vector<ZeroSetEntry> raw;
  std::vector<int> j(q, 0);
  while (true) {
    double ell = 0.0;
    cplx p = 1.0, m = 1.0;
    for (size_t k = 0; k < q; ++k) {
      ell += zeros[k].a * j[k];
      p *= tables.plus[k][j[k]];
      m *= tables.minus[k][j[k]];
    }
    raw.push_back({ ell, p, m });
    size_t k = 0;
    while (k < q && j[k] == n_cap) {
      j[k] = 0;
      ++k;
    }
    if (k == q)
      break;
    ++j[k];
  }
  std::stable_sort(raw.begin(), raw.end(), [](const auto& x, const auto& y) {
    return x.ell < y.ell;
  });
  ZeroSetSequence seq;
  seq.exact_grouping = false;
  for (const auto& e : raw) {
    if (!seq.entries.empty() &&
        e.ell - seq.entries.back().ell <= group_tol * (1.0 + e.ell)) {
      seq.entries.back().c_plus += e.c_plus;
      seq.entries.back().c_minus += e.c_minus;
      ++seq.near_coincidences;
    } else {
      seq.entries.push_back(e);
    }
  }
  return seq;
}

} // namespace

ZeroSetSequence build_sequence(const std::vector<ZeroDatum>& zeros,
                               int n_cap,
                               const ZeroSetOptions& options)
{
  if (n_cap < 0)
    throw invalid_parameter("truncation cap must be nonnegative");
  int q = static_cast<int>(zeros.size());
  double shift = 0.0;
  double a_min = std::numeric_limits<double>::infinity();
  for (const auto& d : zeros) {
    shift += d.a * d.m;
    a_min = std::min(a_min, d.a);
  }
  if (q == 0) {
    ZeroSetSequence seq;
    seq.entries.push_back({ 0.0, 1.0, 1.0 });
    seq.complete_upto = std::numeric_limits<double>::infinity();
    return seq;
  }
  auto tables = coordinate_tables(zeros, n_cap);
  auto budget = static_cast<double>(options.budget);

  ZeroSetSequence seq;
  auto grid = commensurable(zeros);
  double conv_cost = 0.0;
  if (grid) {
    double length = 1.0;
    for (auto v : grid->multiples) {
      conv_cost += length * (n_cap + 1.0);
      length += static_cast<double>(v) * n_cap;
    }
  }
  if (grid && conv_cost <= budget) {
    seq = by_convolution(zeros, n_cap, tables, *grid);
  } else {
    double terms = q * std::pow(n_cap + 1.0, q);
    if (terms > budget)
      throw budget_exceeded("zero-set enumeration needs " + std::to_string(terms) +
                            " terms, budget is " + std::to_string(options.budget));
    seq = by_enumeration(zeros, n_cap, tables, options.group_tol);
  }
  seq.shift = shift;
  seq.n_cap = n_cap;
  seq.complete_upto = a_min * n_cap;
  return seq;
}

ZeroSetSequence build_sequence(const ErrorModel& model,
                               int n_cap,
                               const ZeroSetOptions& options)
{
  return build_sequence(model.zeros(), n_cap, options);
}

GrowthReport growth_check(const ZeroSetSequence& seq, double nu, double ell_lo, double ell_hi)
{
  if (seq.entries.empty())
    throw invalid_parameter("growth check needs a nonempty sequence");
  if (ell_hi <= 0.0) {
    ell_hi = std::min(seq.complete_upto, seq.entries.back().ell);
    ell_lo = ell_hi / 10.0;
  }
  double partial = 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (const auto& e : seq.entries) {
    if (e.ell <= 0.0)
      continue;
    double c = std::max(std::abs(e.c_plus), std::abs(e.c_minus));
    partial += c * std::pow(e.ell, -nu);
    if (e.ell >= ell_lo && e.ell <= ell_hi && c > 0.0) {
      double x = std::log(e.ell), y = std::log(c);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++count;
    }
  }
  double slope = 0.0;
  if (count >= 2) {
    double denom = count * sxx - sx * sx;
    if (denom > 0.0)
      slope = (count * sxy - sx * sy) / denom;
  }
  return { partial, slope, slope + 1.0, ell_lo, ell_hi };
}

} // namespace deconv
