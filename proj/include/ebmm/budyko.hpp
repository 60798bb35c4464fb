#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ebmm/errors.hpp"
#include "ebmm/grid.hpp"
#include "ebmm/physics.hpp"
#include "ebmm/stepper.hpp"

namespace ebmm {

struct BudykoOptions {
    double tol = 1e-3;          // Cauchy gap target in max-over-t discrete L2
    bool stop_early = true;     // stop at the first j whose gap meets tol
    double band_tol = 1e-3;     // half-width of the threshold band for branch classification
    double value_tol = 0.0;     // <= 0 selects the default 1e-6 + dt + dx^2
    StepperOptions stepper;
};

/// One point where the selection fails its branch/interval requirement.
struct InclusionViolation {
    double t = 0.0;
    double x = 0.0;
    double B = 0.0;  // recovered coalbedo value (or the residual on the zero-forcing rule)
    double u = 0.0;
    std::string expected;
};

struct InclusionReport {
    long long ai_branch = 0;
    long long af_branch = 0;
    long long interval = 0;
    long long zero_forcing = 0;  // points handled by the r q = 0 rule
    std::vector<InclusionViolation> violations;
    double band_used = 0.0;
    double value_tol_used = 0.0;
};

/// Limit candidate of the coalbedo-regularization scheme.
struct BudykoSolution {
    Trajectory trajectory;                    // run at the final ramp parameter
    std::vector<std::vector<double>> gamma;   // selection, one row per recorded time
    int j_final = 0;
    double cauchy_gap = 0.0;                  // gap between the last two ramp parameters
    std::vector<int> js;                      // ramp parameters actually run
    std::vector<double> gaps;                 // gaps[k] compares js[k] against js[k-1]
    bool converged = false;
    InclusionReport inclusion_report;
};

namespace detail {
inline double default_value_tol(double dt, double dx) { return 1e-6 + dt + dx * dx; }

/// Selection gamma[t][i] = r q beta_j(u) - (a + b u) + f(H) on the recorded grid.
inline std::vector<std::vector<double>> selection_gamma(const Trajectory& traj, const ModelParams& params,
                                                        int j) {
    CoalbedoSpec ramp = params.coalbedo;
    ramp.kind = CoalbedoSpec::Kind::budyko_regularized;
    ramp.j = j;
    std::vector<std::vector<double>> gamma(traj.times.size(), std::vector<double>(traj.n));
    for (size_t k = 0; k < traj.times.size(); ++k) {
        const double rt = params.insolation.r(traj.times[k]);
        for (int i = 0; i < traj.n; ++i) {
            const double u = traj.states[k][i];
            gamma[k][i] = rt * params.insolation.q(params.grid.centers[i]) * coalbedo(ramp, u) -
                          (params.emission.a + params.emission.b * u) +
                          params.memory_response.f(traj.h_values[k][i]);
        }
    }
    return gamma;
}
}  // namespace detail

/// Check the recovered selection against the set-valued coalbedo: wherever
/// r q != 0, B = (gamma + (a + b u) - f(H)) / (r q) must equal the branch
/// value away from the threshold and lie in [a_i, a_f] inside the band; the
/// band is widened to the final ramp half-width 1/j, inside which the
/// regularized coalbedo legitimately takes intermediate values.
inline InclusionReport verify_inclusion(const BudykoSolution& solution, const ModelParams& params,
                                        double band_tol, double value_tol) {
    const Trajectory& traj = solution.trajectory;
    if (traj.times.empty() || solution.gamma.size() != traj.times.size())
        throw invalid_state_error("verify_inclusion: solution is not populated");
    InclusionReport report;
    report.band_used = std::max(band_tol, solution.j_final > 0 ? 1.0 / solution.j_final : band_tol);
    report.value_tol_used = value_tol > 0.0 ? value_tol : detail::default_value_tol(traj.dt, traj.dx);

    const double a_i = params.coalbedo.a_i;
    const double a_f = params.coalbedo.a_f;
    const double u_bar = params.coalbedo.u_bar;
    for (size_t k = 0; k < traj.times.size(); ++k) {
        const double rt = params.insolation.r(traj.times[k]);
        for (int i = 0; i < traj.n; ++i) {
            const double rq = rt * params.insolation.q(params.grid.centers[i]);
            const double u = traj.states[k][i];
            const double num = solution.gamma[k][i] + (params.emission.a + params.emission.b * u) -
                               params.memory_response.f(traj.h_values[k][i]);
            if (rq == 0.0) {
                if (std::abs(num) <= report.value_tol_used) {
                    ++report.zero_forcing;
                } else {
                    report.violations.push_back(
                        {traj.times[k], params.grid.centers[i], num, u, "zero_forcing"});
                }
                continue;
            }
            const double B = num / rq;
            if (u < u_bar - report.band_used) {
                if (std::abs(B - a_i) <= report.value_tol_used)
                    ++report.ai_branch;
                else
                    report.violations.push_back({traj.times[k], params.grid.centers[i], B, u, "ai_branch"});
            } else if (u > u_bar + report.band_used) {
                if (std::abs(B - a_f) <= report.value_tol_used)
                    ++report.af_branch;
                else
                    report.violations.push_back({traj.times[k], params.grid.centers[i], B, u, "af_branch"});
            } else {
                if (B >= a_i - report.value_tol_used && B <= a_f + report.value_tol_used)
                    ++report.interval;
                else
                    report.violations.push_back({traj.times[k], params.grid.centers[i], B, u, "interval"});
            }
        }
    }
    return report;
}

/// Solve the set-valued problem by running the smooth-ramp approximations
/// over an increasing j schedule until two consecutive runs agree in
/// max-over-t discrete L2. The affine emission law is required; the
/// a-priori sup-norm monitor does not apply to it, so simulate only records
/// sup_norm_seen here.
template <typename F>
BudykoSolution solve_budyko(const ModelParams& params, F&& u0, double horizon, double dt,
                            const std::vector<int>& j_schedule, const BudykoOptions& options = {}) {
    if (params.coalbedo.kind != CoalbedoSpec::Kind::budyko_graph)
        throw std::invalid_argument("solve_budyko: coalbedo kind must be budyko_graph");
    if (params.emission.kind != EmissionSpec::Kind::budyko)
        throw std::invalid_argument("solve_budyko: emission kind must be budyko (affine)");
    if (j_schedule.size() < 2) throw std::invalid_argument("solve_budyko: schedule needs at least 2 entries");
    for (size_t k = 1; k < j_schedule.size(); ++k)
        if (j_schedule[k] <= j_schedule[k - 1])
            throw std::invalid_argument("solve_budyko: schedule must be strictly increasing");

    StepperOptions stepper = options.stepper;
    stepper.record_memory = true;  // the selection and the inclusion check need H

    BudykoSolution sol;
    Trajectory prev;
    bool met_tol = false;
    for (size_t k = 0; k < j_schedule.size(); ++k) {
        ModelParams ramped = params;
        ramped.coalbedo.kind = CoalbedoSpec::Kind::budyko_regularized;
        ramped.coalbedo.j = j_schedule[k];
        Trajectory traj = simulate(ramped, u0, horizon, dt, stepper);
        sol.js.push_back(j_schedule[k]);
        if (k > 0) {
            double gap = 0.0;
            for (size_t t = 0; t < traj.times.size(); ++t) {
                std::vector<double> diff(traj.n);
                for (int i = 0; i < traj.n; ++i) diff[i] = traj.states[t][i] - prev.states[t][i];
                gap = std::max(gap, l2_norm(diff, traj.dx));
            }
            sol.gaps.push_back(gap);
            sol.cauchy_gap = gap;
            if (gap <= options.tol) met_tol = true;
        }
        sol.j_final = j_schedule[k];
        prev = traj;
        sol.trajectory = std::move(traj);
        if (met_tol && options.stop_early) break;
    }
    if (!met_tol)
        throw no_convergence_error("solve_budyko: schedule exhausted with final Cauchy gap " +
                                       std::to_string(sol.cauchy_gap) + " > tol " +
                                       std::to_string(options.tol),
                                   sol.gaps);
    sol.converged = true;
    sol.gamma = detail::selection_gamma(sol.trajectory, params, sol.j_final);
    sol.inclusion_report = verify_inclusion(sol, params, options.band_tol, options.value_tol);
    return sol;
}

}  // namespace ebmm
