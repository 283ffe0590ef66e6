#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace deconv {

//! Runs one subcommand (kernel, coeffs, estimate, simulate, check). `args`
//! excludes the program name. Returns 0 on success, 1 on runtime failures and
//! 2 on usage or configuration errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CheckResult
{
  std::string name;
  bool passed;
  std::string detail;
};

//! Oracle checks behind the `check` subcommand.
std::vector<CheckResult> run_checks();

//! Shortest decimal text that reads back to the same double.
std::string format_number(double v);

//! Values of a single-column CSV; '#' lines and a non-numeric header are skipped.
std::vector<double> read_column(const std::string& path);

} // namespace deconv
