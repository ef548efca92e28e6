#pragma once

#include <stdexcept>
#include <string>

namespace guidecap {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 1, Dimension/Index/Data/StateError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

}  // namespace guidecap
