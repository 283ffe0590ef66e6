#include "deconv/config.hpp"
#include "deconv/errors.hpp"

#include <toml.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace deconv {

namespace {

using Keys = std::vector<std::string>;

std::string join(const Keys& keys)
{
  std::string out;
  for (const auto& k : keys)
    out += (out.empty() ? "" : ", ") + k;
  return out;
}

std::string qualified(const std::string& prefix, const std::string& key)
{
  return prefix.empty() ? key : prefix + "." + key;
}

// Rejects keys outside `allowed` and reports every absent `required` key.
void check_keys(const toml::table& tbl,
                const std::string& prefix,
                const Keys& required,
                const Keys& optional)
{
  Keys allowed = required;
  allowed.insert(allowed.end(), optional.begin(), optional.end());
  for (const auto& [key, node] : tbl) {
    std::string k(key.str());
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw config_error("unknown key '" + qualified(prefix, k) + "'; valid keys" +
                         (prefix.empty() ? "" : " in " + prefix) + ": " + join(allowed));
  }
  Keys missing;
  for (const auto& k : required)
    if (!tbl.contains(k))
      missing.push_back(qualified(prefix, k));
  if (!missing.empty())
    throw config_error("missing required key(s): " + join(missing));
}

double get_real(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  const auto* node = tbl.get(key);
  if (auto v = node->value<double>(); v && (node->is_floating_point() || node->is_integer()))
    return *v;
  throw config_error(qualified(prefix, key) + ": expected a number");
}

std::int64_t get_int(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  const auto* node = tbl.get(key);
  if (node->is_integer())
    return *node->value<std::int64_t>();
  throw config_error(qualified(prefix, key) + ": expected an integer");
}

int get_small_int(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  auto v = get_int(tbl, prefix, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw config_error(qualified(prefix, key) + ": integer out of range");
  return static_cast<int>(v);
}

std::string get_string(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  if (auto v = tbl.get(key)->value<std::string>(); v && tbl.get(key)->is_string())
    return *v;
  throw config_error(qualified(prefix, key) + ": expected a string");
}

bool get_bool(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  if (tbl.get(key)->is_boolean())
    return *tbl.get(key)->value<bool>();
  throw config_error(qualified(prefix, key) + ": expected true or false");
}

const toml::array& get_array(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  if (const auto* arr = tbl.get(key)->as_array())
    return *arr;
  throw config_error(qualified(prefix, key) + ": expected an array");
}

std::vector<double> get_reals(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  std::vector<double> out;
  for (const auto& node : get_array(tbl, prefix, key)) {
    auto v = node.value<double>();
    if (!v || !(node.is_floating_point() || node.is_integer()))
      throw config_error(qualified(prefix, key) + ": expected an array of numbers");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::int64_t> get_ints(const toml::table& tbl, const std::string& prefix, const std::string& key)
{
  std::vector<std::int64_t> out;
  for (const auto& node : get_array(tbl, prefix, key)) {
    if (!node.is_integer())
      throw config_error(qualified(prefix, key) + ": expected an array of integers");
    out.push_back(*node.value<std::int64_t>());
  }
  return out;
}

const toml::table& get_table(const toml::table& tbl, const std::string& key)
{
  if (const auto* t = tbl.get(key)->as_table())
    return *t;
  throw config_error(key + ": expected a table");
}

const std::map<std::string, std::pair<Keys, Keys>> error_keys{
  { "uniform", { { "kind", "theta" }, {} } },
  { "uniform_convolution", { { "kind", "thetas", "mults" }, {} } },
  { "discrete", { { "kind", "probs" }, { "step", "first_index", "unit_tol" } } },
  { "binomial", { { "kind", "m" }, {} } },
  { "uniform_gamma", { { "kind", "theta", "shape", "rate" }, {} } },
};

const std::map<std::string, std::pair<Keys, Keys>> density_keys{
  { "cauchy_power", { { "kind", "r" }, {} } },
  { "smooth_compact", { { "kind" }, { "center", "width" } } },
};

Keys kinds_of(const std::map<std::string, std::pair<Keys, Keys>>& m)
{
  Keys out;
  for (const auto& [k, v] : m)
    out.push_back(k);
  return out;
}

std::string read_kind(const toml::table& tbl,
                      const std::string& prefix,
                      const std::map<std::string, std::pair<Keys, Keys>>& table)
{
  if (!tbl.contains("kind"))
    throw config_error("missing required key(s): " + prefix + ".kind");
  auto kind = get_string(tbl, prefix, "kind");
  auto it = table.find(kind);
  if (it == table.end())
    throw config_error(prefix + ".kind: unknown kind '" + kind + "'; valid kinds: " +
                       join(kinds_of(table)));
  check_keys(tbl, prefix, it->second.first, it->second.second);
  return kind;
}

ErrorDecl parse_error(const toml::table& tbl)
{
  ErrorDecl d;
  d.kind = read_kind(tbl, "error", error_keys);
  const std::string p = "error";
  if (d.kind == "uniform") {
    d.theta = get_real(tbl, p, "theta");
  } else if (d.kind == "uniform_convolution") {
    d.thetas = get_reals(tbl, p, "thetas");
    for (auto v : get_ints(tbl, p, "mults")) {
      if (v < 1 || v > 1000)
        throw invalid_parameter("error.mults: multiplicity " + std::to_string(v) +
                                " outside 1..1000");
      d.mults.push_back(static_cast<int>(v));
    }
  } else if (d.kind == "discrete") {
    d.probs = get_reals(tbl, p, "probs");
    if (tbl.contains("step"))
      d.step = get_real(tbl, p, "step");
    if (tbl.contains("first_index"))
      d.first_index = get_small_int(tbl, p, "first_index");
    if (tbl.contains("unit_tol"))
      d.unit_tol = get_real(tbl, p, "unit_tol");
  } else if (d.kind == "binomial") {
    d.m = get_small_int(tbl, p, "m");
  } else {
    d.theta = get_real(tbl, p, "theta");
    d.shape = get_real(tbl, p, "shape");
    d.rate = get_real(tbl, p, "rate");
  }
  return d;
}

DensityDecl parse_density(const toml::table& tbl)
{
  DensityDecl d;
  d.kind = read_kind(tbl, "density", density_keys);
  if (d.kind == "cauchy_power") {
    d.r = get_real(tbl, "density", "r");
  } else {
    if (tbl.contains("center"))
      d.center = get_real(tbl, "density", "center");
    if (tbl.contains("width"))
      d.width = get_real(tbl, "density", "width");
  }
  return d;
}

RiskDecl parse_risk(const toml::table& tbl)
{
  RiskDecl r;
  if (!tbl.contains("kind"))
    throw config_error("missing required key(s): risk.kind");
  auto kind = get_string(tbl, "risk", "kind");
  if (kind == "pointwise") {
    check_keys(tbl, "risk", { "kind" }, { "x0" });
    r.kind = RiskKind::pointwise;
    if (tbl.contains("x0"))
      r.x0 = get_real(tbl, "risk", "x0");
  } else if (kind == "l2") {
    check_keys(tbl, "risk", { "kind" }, { "lo", "hi", "step" });
    r.kind = RiskKind::l2;
    if (tbl.contains("lo"))
      r.lo = get_real(tbl, "risk", "lo");
    if (tbl.contains("hi"))
      r.hi = get_real(tbl, "risk", "hi");
    if (tbl.contains("step"))
      r.step = get_real(tbl, "risk", "step");
  } else {
    throw config_error("risk.kind: unknown kind '" + kind + "'; valid kinds: pointwise, l2");
  }
  return r;
}

[[noreturn]] void bad(const std::string& path, double value, const std::string& why)
{
  std::ostringstream msg;
  msg << path << " = " << value << ": " << why;
  throw invalid_parameter(msg.str());
}

void positive(const std::string& path, double v)
{
  if (!(v > 0.0) || !std::isfinite(v))
    bad(path, v, "must be positive and finite");
}

std::string format_real(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos)
    s += ".0";
  return s;
}

std::string quote(const std::string& s)
{
  std::ostringstream out;
  out << toml::value<std::string>(s);
  return out.str();
}

template <typename T, typename F>
std::string list(const std::vector<T>& v, F fmt)
{
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i)
    out += (i ? ", " : "") + fmt(v[i]);
  return out + "]";
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw config_error(msg.str());
  }
  check_keys(root, "", { "error", "density", "n_grid" },
             { "risk", "reps", "alpha", "p", "a_const", "b_const", "seed", "k0", "workers",
               "bootstrap", "max_cap", "plot", "output_dir" });

  ExperimentConfig c;
  c.error = parse_error(get_table(root, "error"));
  c.density = parse_density(get_table(root, "density"));
  if (root.contains("risk"))
    c.risk = parse_risk(get_table(root, "risk"));
  for (auto v : get_ints(root, "", "n_grid")) {
    if (v < 2)
      bad("n_grid", static_cast<double>(v), "sample sizes must be at least 2");
    c.n_grid.push_back(static_cast<std::size_t>(v));
  }
  if (root.contains("reps"))
    c.reps = get_small_int(root, "", "reps");
  if (root.contains("alpha"))
    c.alpha = get_real(root, "", "alpha");
  if (root.contains("p"))
    c.p = get_real(root, "", "p");
  if (root.contains("a_const"))
    c.a_const = get_real(root, "", "a_const");
  if (root.contains("b_const"))
    c.b_const = get_real(root, "", "b_const");
  if (root.contains("seed")) {
    auto s = get_int(root, "", "seed");
    if (s < 0)
      bad("seed", static_cast<double>(s), "must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (root.contains("k0"))
    c.k0 = get_small_int(root, "", "k0");
  if (root.contains("workers"))
    c.workers = get_small_int(root, "", "workers");
  if (root.contains("bootstrap"))
    c.bootstrap = get_small_int(root, "", "bootstrap");
  if (root.contains("max_cap"))
    c.max_cap = get_small_int(root, "", "max_cap");
  if (root.contains("plot"))
    c.plot = get_bool(root, "", "plot");
  if (root.contains("output_dir"))
    c.output_dir = get_string(root, "", "output_dir");
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw config_error("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ExperimentConfig& c)
{
  const auto& e = c.error;
  if (e.kind == "uniform" || e.kind == "uniform_gamma")
    positive("error.theta", e.theta);
  if (e.kind == "uniform_gamma") {
    positive("error.shape", e.shape);
    positive("error.rate", e.rate);
  }
  if (e.kind == "uniform_convolution") {
    for (size_t i = 0; i < e.thetas.size(); ++i)
      positive("error.thetas[" + std::to_string(i) + "]", e.thetas[i]);
    for (size_t i = 0; i < e.mults.size(); ++i)
      if (e.mults[i] < 1)
        bad("error.mults[" + std::to_string(i) + "]", e.mults[i], "must be at least 1");
    if (e.thetas.size() != e.mults.size() || e.thetas.empty())
      throw invalid_parameter("error.thetas and error.mults must be nonempty and of equal length");
  }
  if (e.kind == "discrete") {
    positive("error.step", e.step);
    positive("error.unit_tol", e.unit_tol);
    for (size_t i = 0; i < e.probs.size(); ++i)
      if (!(e.probs[i] >= 0.0))
        bad("error.probs[" + std::to_string(i) + "]", e.probs[i], "must be nonnegative");
  }
  if (e.kind == "binomial" && e.m < 1)
    bad("error.m", e.m, "must be at least 1");
  try {
    make_error_model(e);
  } catch (const invalid_parameter& ex) {
    throw invalid_parameter(std::string("error: ") + ex.what());
  }

  if (c.density.kind == "cauchy_power" && !(c.density.r > 0.5))
    bad("density.r", c.density.r, "must exceed 1/2");
  if (c.density.kind == "smooth_compact") {
    positive("density.width", c.density.width);
    if (!std::isfinite(c.density.center))
      bad("density.center", c.density.center, "must be finite");
  }

  const auto& r = c.risk;
  if (!std::isfinite(r.x0))
    bad("risk.x0", r.x0, "must be finite");
  int given = r.lo.has_value() + r.hi.has_value() + r.step.has_value();
  if (given != 0 && given != 3)
    throw invalid_parameter("risk: lo, hi and step must be given together");
  if (given == 3) {
    if (!(*r.lo < *r.hi))
      bad("risk.hi", *r.hi, "must exceed risk.lo");
    positive("risk.step", *r.step);
    if ((*r.hi - *r.lo) / *r.step > 1e7)
      bad("risk.step", *r.step, "grid would exceed 1e7 points");
  }

  if (c.n_grid.empty())
    throw invalid_parameter("n_grid must be nonempty");
  for (size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 2)
      bad("n_grid[" + std::to_string(i) + "]", static_cast<double>(c.n_grid[i]),
          "sample sizes must be at least 2");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1])
      bad("n_grid[" + std::to_string(i) + "]", static_cast<double>(c.n_grid[i]),
          "n_grid must be strictly increasing");
  }
  if (c.reps < 1)
    bad("reps", c.reps, "must be at least 1");
  positive("alpha", c.alpha);
  if (c.p) {
    positive("p", *c.p);
    if (r.kind == RiskKind::l2 && *c.p <= 0.5)
      bad("p", *c.p, "L2 risk needs p > 1/2");
  }
  positive("a_const", c.a_const);
  positive("b_const", c.b_const);
  if (c.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    throw invalid_parameter("seed must fit a signed 64-bit integer");
  if (c.k0 && *c.k0 < c.alpha + 1.0)
    bad("k0", *c.k0, "must be at least alpha + 1");
  if (c.workers < 1)
    bad("workers", c.workers, "must be at least 1");
  if (c.bootstrap < 0)
    bad("bootstrap", c.bootstrap, "must be nonnegative");
  if (c.max_cap < 1)
    bad("max_cap", c.max_cap, "must be at least 1");
  if (c.output_dir.empty())
    throw invalid_parameter("output_dir must be nonempty");
}

ErrorModel make_error_model(const ErrorDecl& d)
{
  if (d.kind == "uniform")
    return make_uniform(d.theta);
  if (d.kind == "uniform_convolution")
    return make_uniform_convolution(d.thetas, d.mults);
  if (d.kind == "discrete") {
    DiscreteOptions opts;
    opts.unit_tol = d.unit_tol;
    return d.first_index ? make_discrete(d.step, d.probs, *d.first_index, opts)
                         : make_discrete(d.step, d.probs, opts);
  }
  if (d.kind == "binomial")
    return make_binomial(d.m);
  if (d.kind == "uniform_gamma")
    return make_uniform_smooth_convolution(d.theta, d.shape, d.rate);
  throw invalid_parameter("unknown error kind '" + d.kind + "'");
}

TestDensity make_density(const DensityDecl& d)
{
  if (d.kind == "cauchy_power")
    return density_cauchy_power(d.r);
  if (d.kind == "smooth_compact")
    return density_smooth_compact(d.center, d.width);
  throw invalid_parameter("unknown density kind '" + d.kind + "'");
}

RateExperiment make_experiment(const ExperimentConfig& c)
{
  RiskSettings s;
  s.kind = c.risk.kind;
  s.x0 = c.risk.x0;
  s.alpha = c.alpha;
  s.p = c.p;
  s.a_const = c.a_const;
  s.b_const = c.b_const;
  s.k0 = c.k0;
  s.workers = c.workers;
  s.tuning.max_cap = c.max_cap;
  if (c.risk.lo) {
    std::vector<double> grid;
    auto count = static_cast<std::size_t>(std::ceil((*c.risk.hi - *c.risk.lo) / *c.risk.step));
    for (std::size_t i = 0; i <= count; ++i)
      grid.push_back(*c.risk.lo + (*c.risk.hi - *c.risk.lo) * static_cast<double>(i) /
                                    static_cast<double>(count));
    s.grid = std::move(grid);
  }
  return RateExperiment{ make_error_model(c.error), make_density(c.density), s,
                         c.n_grid, c.reps, c.seed, c.bootstrap };
}

std::string serialize_config(const ExperimentConfig& c)
{
  std::ostringstream out;
  auto real = [](double v) { return format_real(v); };
  auto integer = [](auto v) { return std::to_string(v); };

  out << "n_grid = " << list(c.n_grid, integer) << "\n";
  out << "reps = " << c.reps << "\n";
  out << "alpha = " << real(c.alpha) << "\n";
  if (c.p)
    out << "p = " << real(*c.p) << "\n";
  out << "a_const = " << real(c.a_const) << "\n";
  out << "b_const = " << real(c.b_const) << "\n";
  out << "seed = " << c.seed << "\n";
  if (c.k0)
    out << "k0 = " << *c.k0 << "\n";
  out << "workers = " << c.workers << "\n";
  out << "bootstrap = " << c.bootstrap << "\n";
  out << "max_cap = " << c.max_cap << "\n";
  out << "plot = " << (c.plot ? "true" : "false") << "\n";
  out << "output_dir = " << quote(c.output_dir) << "\n";

  const auto& e = c.error;
  out << "\n[error]\nkind = " << quote(e.kind) << "\n";
  if (e.kind == "uniform") {
    out << "theta = " << real(e.theta) << "\n";
  } else if (e.kind == "uniform_convolution") {
    out << "thetas = " << list(e.thetas, real) << "\n";
    out << "mults = " << list(e.mults, integer) << "\n";
  } else if (e.kind == "discrete") {
    out << "probs = " << list(e.probs, real) << "\n";
    out << "step = " << real(e.step) << "\n";
    if (e.first_index)
      out << "first_index = " << *e.first_index << "\n";
    out << "unit_tol = " << real(e.unit_tol) << "\n";
  } else if (e.kind == "binomial") {
    out << "m = " << e.m << "\n";
  } else if (e.kind == "uniform_gamma") {
    out << "theta = " << real(e.theta) << "\nshape = " << real(e.shape)
        << "\nrate = " << real(e.rate) << "\n";
  }

  out << "\n[density]\nkind = " << quote(c.density.kind) << "\n";
  if (c.density.kind == "cauchy_power")
    out << "r = " << real(c.density.r) << "\n";
  else
    out << "center = " << real(c.density.center) << "\nwidth = " << real(c.density.width) << "\n";

  out << "\n[risk]\n";
  if (c.risk.kind == RiskKind::pointwise) {
    out << "kind = \"pointwise\"\nx0 = " << real(c.risk.x0) << "\n";
  } else {
    out << "kind = \"l2\"\n";
    if (c.risk.lo)
      out << "lo = " << real(*c.risk.lo) << "\nhi = " << real(*c.risk.hi)
          << "\nstep = " << real(*c.risk.step) << "\n";
  }
  return out.str();
}

std::string resolved_output_dir(const ExperimentConfig& config)
{
  if (const char* env = std::getenv("DECONV_OUTPUT_DIR"); env && *env)
    return env;
  return config.output_dir;
}

std::string fnv1a_hex(const std::string& text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& config)
{
  return fnv1a_hex(serialize_config(config));
}

} // namespace deconv
