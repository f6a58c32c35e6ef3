#pragma once

#include <stdexcept>
#include <string>

namespace dcmg {

/// Invalid topology, parameters or configuration.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A voltage left the physical domain V > 0.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Parameters for which the regulation problem has no admissible solution
/// (reference below the source voltage, constant-power load without
/// conductance, ...).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nonlinear solver failure (singular Jacobian, no convergence).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dcmg
