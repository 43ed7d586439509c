#pragma once

#include <stdexcept>
#include <string>

namespace stereoconf {

// Argument outside the mathematical domain of an operation (bad confidence,
// invalid loss parameters, empty masks, malformed density lists).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Two maps that must share a shape do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or malformed file, failed write.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stereoconf
