#pragma once

#include <stdexcept>
#include <string>

namespace dualgate {

/// Argument outside the mathematical domain of an operation
/// (quantile of 0 or 1, negative shape parameter, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The Renyi integral diverges for this (family, order) combination.
class DivergenceInfinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A monotone root search could not bracket its target. Indicates an
/// inconsistent family configuration rather than bad user input.
class RootNotBracketed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// E_{P+}[U^{-1/p}] is not finite for the requested pair.
class MomentDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceedsHorizon : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonpositiveMargin : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dualgate
