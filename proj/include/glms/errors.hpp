#pragma once

#include <stdexcept>
#include <string>

namespace glms {

// Error taxonomy mirrored by the CLI exit codes: config 2, numeric 3, audit 4.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : error {
  using error::error;
};

struct numeric_error : error {
  using error::error;
};

struct audit_error : error {
  using error::error;
};

}  // namespace glms
