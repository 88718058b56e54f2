#pragma once

#include <stdexcept>
#include <string>

namespace trajmix {

/// Shape or width mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation invoked in a state that does not allow it (e.g. backward twice).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input value violates a documented precondition.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace trajmix
