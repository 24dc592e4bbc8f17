#pragma once

#include <stdexcept>
#include <string>

namespace pedcal {

// Invalid configuration, unusable input files, infeasible scenario setup.
// CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failure (non-finite states, degenerate geometry, ...).
// CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Two agents closer than the singularity threshold of the pair force.
// Deliberately loud: capping the force here would silently corrupt gradients.
struct SingularSeparation : NumericalError {
    explicit SingularSeparation(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace pedcal
