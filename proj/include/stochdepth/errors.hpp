#pragma once

#include <stdexcept>
#include <string>

namespace stochdepth {

// File could not be opened, read or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File opened fine but its contents violate the expected format.
struct CorruptDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite value; the run is aborted.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stochdepth
