#pragma once

#include <stdexcept>
#include <string>

namespace qsat {

// Caller broke a documented precondition.
struct ContractViolation : std::invalid_argument {
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Requested ensemble cannot be sampled (e.g. more clauses than distinct k-subsets).
struct InfeasibleEnsembleError : std::runtime_error {
  explicit InfeasibleEnsembleError(const std::string& what) : std::runtime_error(what) {}
};

// Instance falls outside the regime an algorithm handles (e.g. cyclic dimer orientation).
struct UnsupportedInstanceError : std::runtime_error {
  explicit UnsupportedInstanceError(const std::string& what) : std::runtime_error(what) {}
};

// A projector turned out numerically degenerate where a generic one was required.
struct DegenerateProjectorError : std::runtime_error {
  explicit DegenerateProjectorError(const std::string& what) : std::runtime_error(what) {}
};

// A log/division left its domain during a free-energy evaluation; message names the term.
struct NumericalDomainError : std::runtime_error {
  explicit NumericalDomainError(const std::string& what) : std::runtime_error(what) {}
};

// Least-squares system too ill-conditioned to trust.
struct IllConditionedFitError : std::runtime_error {
  explicit IllConditionedFitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qsat
