#pragma once

#include <stdexcept>
#include <string>

namespace rcm {

/// Shape, range and precondition violations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File system and file-format failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset inconsistencies such as unpaired files or empty datasets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rcm
