#pragma once

#include <stdexcept>
#include <string>

namespace secbeam {

// Invalid SystemConfig / QoSSpec / campaign configuration fields.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller contract violations: dimension mismatches, empty inputs, bad indices.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Linearization requested at a point with a singular or unsafe gradient.
struct ExpansionPointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace secbeam
