#pragma once

#include <stdexcept>

namespace dbrn {

// Library-level error categories. The CLI maps them onto exit codes
// (usage/parameter -> 2, format/data -> 3, numeric -> 4).

struct param_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dbrn
