#pragma once

#include <stdexcept>
#include <string>

namespace deconv {

struct invalid_parameter : std::invalid_argument
{
  using std::invalid_argument::invalid_argument;
};

struct numerical_failure : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct unsupported_order : std::out_of_range
{
  using std::out_of_range::out_of_range;
};

struct budget_exceeded : std::length_error
{
  using std::length_error::length_error;
};

struct arithmetic_overflow : std::overflow_error
{
  using std::overflow_error::overflow_error;
};

//! Raised by the closed-form base function builder for models without one.
struct not_closed_form : std::logic_error
{
  using std::logic_error::logic_error;
};

struct config_error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

} // namespace deconv
