#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ebmm {

/// Runtime sup-norm exceeded the a-priori ceiling; carries the offending sample.
struct bound_violation_error : std::runtime_error {
    double t;
    double x;
    double value;
    double bound;
    bound_violation_error(double t_, double x_, double value_, double bound_)
        : std::runtime_error("sup-norm bound violated at t=" + std::to_string(t_) +
                             ", x=" + std::to_string(x_) + ": |u|=" + std::to_string(value_) +
                             " > " + std::to_string(bound_)),
          t(t_), x(x_), value(value_), bound(bound_) {}
};

/// Regularization schedule exhausted without meeting the Cauchy tolerance.
struct no_convergence_error : std::runtime_error {
    std::vector<double> gaps;
    no_convergence_error(std::string what, std::vector<double> gaps_)
        : std::runtime_error(std::move(what)), gaps(std::move(gaps_)) {}
};

/// Pointwise division in the direct reconstruction fell below the safety floor.
struct division_unstable_error : std::runtime_error {
    std::vector<int> cells;
    division_unstable_error(std::string what, std::vector<int> cells_)
        : std::runtime_error(std::move(what)), cells(std::move(cells_)) {}
};

/// Optimizer failed to reduce the gradient norm within the iteration budget.
struct optimizer_stall_error : std::runtime_error {
    std::vector<double> objective_history;
    std::vector<double> gradient_norm_history;
    optimizer_stall_error(std::string what, std::vector<double> obj, std::vector<double> grad)
        : std::runtime_error(std::move(what)),
          objective_history(std::move(obj)), gradient_norm_history(std::move(grad)) {}
};

/// Serialized payload does not match its sidecar digest.
struct integrity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scenario document violates the schema or a semantic constraint; the
/// message names the offending field path or constraint.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation called on an object whose state does not admit it.
struct invalid_state_error : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace ebmm
