#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ebmm/errors.hpp"
#include "ebmm/grid.hpp"
#include "ebmm/memory.hpp"
#include "ebmm/physics.hpp"

namespace ebmm {

/// Pick the largest step dt = tau/p with dt <= target_dt such that delta/dt
/// and horizon/dt are integers (so the delay-window edges and the final time
/// land exactly on grid points). Scans p upward; refuses to go below
/// target_dt/10.
inline double select_dt(double tau, double delta, double horizon, double target_dt) {
    if (!(tau > 0.0) || !(target_dt > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("select_dt: tau, horizon and target_dt must be positive");
    if (delta < 0.0 || delta >= tau) throw std::invalid_argument("select_dt: need 0 <= delta < tau");

    const auto divides = [](double whole, double dt) {
        if (whole == 0.0) return true;
        const double ratio = whole / dt;
        return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, std::abs(ratio));
    };

    int p = static_cast<int>(std::ceil(tau / target_dt - 1e-12));
    if (p < 1) p = 1;
    const double floor_dt = target_dt / 10.0;
    for (; tau / p >= floor_dt * (1.0 - 1e-12); ++p) {
        const double dt = tau / p;
        if (dt > target_dt * (1.0 + 1e-12)) continue;
        if (divides(delta, dt) && divides(horizon, dt)) return dt;
    }
    throw std::invalid_argument("select_dt: no admissible step in [target_dt/10, target_dt] for these windows");
}

enum class Scheme { backward_euler, crank_nicolson };

struct StepperOptions {
    Scheme scheme = Scheme::backward_euler;
    double bound_slack = 0.05;   // tolerated overshoot fraction of the a-priori ceiling
    bool monitor_bound = true;   // only enforceable for the quartic emission law
    int stride = 1;              // record every stride-th step (must divide the step count)
    bool record_memory = true;   // store the memory integral alongside each recorded state
};

/// Output of a forward run: recorded states, the memory integral at each
/// recorded time, and the full delay window at both ends of the run.
struct Trajectory {
    int n = 0;
    double dx = 0.0;
    double rho0 = 1.0;
    double dt = 0.0;
    double tau = 0.0;
    double delta = 0.0;
    int stride = 1;
    double sup_norm_seen = 0.0;
    std::uint64_t params_digest = 0;

    std::vector<double> times;                    // recorded times, t = 0 first
    std::vector<std::vector<double>> states;      // one row per recorded time
    std::vector<std::vector<double>> h_values;    // memory integral per recorded time
    std::vector<std::vector<double>> history_0;   // delay window at t = 0, oldest row first
    std::vector<std::vector<double>> final_history;  // delay window at the final time
};

/// One IMEX step from (u, t) to t + dt: diffusion implicit, reaction and
/// memory explicit. The memory integral is taken from the buffer, whose head
/// must sit at t; the caller pushes the returned state afterwards.
inline std::vector<double> step(const DiffusionOperator& op, const ModelParams& params,
                                const HistoryWeights& weights, const HistoryBuffer& buf,
                                const std::vector<double>& u, double t, double dt, Scheme scheme) {
    const std::vector<double> H = eval_history(buf, weights, params.grid.n);
    const std::vector<double> g = rhs(t, u, H, params);
    const int n = op.n;
    std::vector<double> b(n);
    if (scheme == Scheme::backward_euler) {
        for (int i = 0; i < n; ++i) b[i] = u[i] + dt * g[i];
        return solve_implicit(op, b, dt);
    }
    const std::vector<double> Au = apply_diffusion(op, u);
    for (int i = 0; i < n; ++i) b[i] = u[i] + 0.5 * dt * Au[i] + dt * g[i];
    return solve_implicit(op, b, 0.5 * dt);
}

namespace detail {
inline std::vector<std::vector<double>> snapshot_window(const HistoryBuffer& buf) {
    std::vector<std::vector<double>> rows;
    rows.reserve(buf.m + 1);
    for (int j = 0; j <= buf.m; ++j) rows.push_back(buf.slot(j));
    return rows;
}
}  // namespace detail

/// Run the model from t = 0 to t = horizon with fixed step dt. The initial
/// datum u0(s, x) fills the delay window s in [-tau, 0]; tau/dt and
/// horizon/dt must be integers. Throws bound_violation_error the first time
/// a state exceeds (1 + bound_slack) times the a-priori sup-norm ceiling.
template <typename F>
Trajectory simulate(const ModelParams& params, F&& u0, double horizon, double dt,
                    const StepperOptions& options = {}) {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate: horizon must be positive");
    const double steps_real = horizon / dt;
    const long long num_steps = std::llround(steps_real);
    if (num_steps < 1 || std::abs(steps_real - static_cast<double>(num_steps)) > 1e-9 * steps_real)
        throw std::invalid_argument("simulate: horizon/dt must be a positive integer");
    if (options.stride < 1 || num_steps % options.stride != 0)
        throw std::invalid_argument("simulate: stride must be a positive divisor of the step count");

    const Grid& grid = params.grid;
    const int n = grid.n;
    const DiffusionOperator op = assemble_diffusion(grid);
    HistoryBuffer buf = init_history(std::forward<F>(u0), grid, dt, params.kernel.tau);
    const HistoryWeights weights = make_history_weights(params.kernel, grid, dt, buf.m);

    Trajectory traj;
    traj.n = n;
    traj.dx = grid.dx;
    traj.rho0 = grid.rho0;
    traj.dt = dt;
    traj.tau = params.kernel.tau;
    traj.delta = params.kernel.delta;
    traj.stride = options.stride;
    traj.params_digest = ebmm::params_digest(params);
    traj.history_0 = detail::snapshot_window(buf);

    double ceiling = 0.0;
    bool have_ceiling = false;
    std::vector<double> u = buf.slot(buf.m);
    traj.sup_norm_seen = linf_norm(u);
    if (options.monitor_bound && params.emission.kind == EmissionSpec::Kind::sellers) {
        ceiling = linf_bound(params, traj.sup_norm_seen) * (1.0 + options.bound_slack);
        have_ceiling = true;
    }

    const auto record = [&](double t, const std::vector<double>& state) {
        traj.times.push_back(t);
        traj.states.push_back(state);
        if (options.record_memory) traj.h_values.push_back(eval_history(buf, weights, n));
    };
    record(0.0, u);

    for (long long k = 0; k < num_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        std::vector<double> next = step(op, params, weights, buf, u, t, dt, options.scheme);
        const double t_next = static_cast<double>(k + 1) * dt;
        push_state(buf, next, t_next);
        u = std::move(next);

        double sup = 0.0;
        int arg = 0;
        for (int i = 0; i < n; ++i) {
            const double a = std::abs(u[i]);
            if (a > sup) {
                sup = a;
                arg = i;
            }
        }
        traj.sup_norm_seen = std::max(traj.sup_norm_seen, sup);
        if (have_ceiling && sup > ceiling)
            throw bound_violation_error(t_next, grid.centers[arg], sup, ceiling);

        if ((k + 1) % options.stride == 0) record(t_next, u);
    }

    traj.final_history = detail::snapshot_window(buf);
    return traj;
}

/// Time derivative of the recorded states by finite differences on the
/// recorded time grid: centered in the interior, second-order one-sided at
/// the ends. Needs at least three recorded states.
inline std::vector<std::vector<double>> time_derivative(const Trajectory& traj) {
    const size_t m = traj.times.size();
    if (m < 3) throw invalid_state_error("time_derivative: need at least three recorded states");
    const double h = traj.times[1] - traj.times[0];
    const int n = traj.n;
    std::vector<std::vector<double>> du(m, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        du[0][i] = (-3.0 * traj.states[0][i] + 4.0 * traj.states[1][i] - traj.states[2][i]) / (2.0 * h);
        for (size_t k = 1; k + 1 < m; ++k)
            du[k][i] = (traj.states[k + 1][i] - traj.states[k - 1][i]) / (2.0 * h);
        du[m - 1][i] =
            (3.0 * traj.states[m - 1][i] - 4.0 * traj.states[m - 2][i] + traj.states[m - 3][i]) / (2.0 * h);
    }
    return du;
}

}  // namespace ebmm
