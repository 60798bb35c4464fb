#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "ebmm/ebmm.hpp"

using namespace ebmm;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("admissible profile specs are validated structurally") {
    AdmissibleSetSpec good;
    good.breakpoints = {-1.0, 0.0, 1.0};
    good.piece_coeffs = {{1.0}, {2.0}};
    REQUIRE_NOTHROW(validate_admissible(good));

    AdmissibleSetSpec s = good;
    s.breakpoints = {-1.0};
    s.piece_coeffs = {};
    REQUIRE_THROWS_WITH(validate_admissible(s), ContainsSubstring("at least two breakpoints"));

    s = good;
    s.breakpoints = {-0.5, 0.0, 1.0};
    REQUIRE_THROWS_WITH(validate_admissible(s), ContainsSubstring("start at -1 and end at 1"));

    s = good;
    s.breakpoints = {-1.0, 0.0, 0.0, 1.0};
    s.piece_coeffs = {{1.0}, {2.0}, {3.0}};
    REQUIRE_THROWS_WITH(validate_admissible(s), ContainsSubstring("strictly increasing"));

    s = good;
    s.piece_coeffs = {{1.0}};
    REQUIRE_THROWS_WITH(validate_admissible(s), ContainsSubstring("one coefficient list per interval"));

    s = good;
    s.piece_coeffs = {{1.0}, {}};
    REQUIRE_THROWS_WITH(validate_admissible(s), ContainsSubstring("empty polynomial piece"));
}

TEST_CASE("piecewise evaluation is right-open with a closed final piece") {
    AdmissibleSetSpec spec;
    spec.breakpoints = {-1.0, 0.0, 1.0};
    spec.piece_coeffs = {{1.0}, {2.0}};

    REQUIRE(evaluate_piecewise_analytic(spec, -1.0) == 1.0);
    REQUIRE(evaluate_piecewise_analytic(spec, -0.5) == 1.0);
    REQUIRE(evaluate_piecewise_analytic(spec, 0.0) == 2.0);  // breakpoint belongs to the right piece
    REQUIRE(evaluate_piecewise_analytic(spec, 0.5) == 2.0);
    REQUIRE(evaluate_piecewise_analytic(spec, 1.0) == 2.0);  // closed right end

    REQUIRE_THROWS_WITH(evaluate_piecewise_analytic(spec, 1.0 + 1e-12),
                        ContainsSubstring("x outside [-1, 1]"));
    REQUIRE_THROWS_WITH(evaluate_piecewise_analytic(spec, -1.5),
                        ContainsSubstring("x outside [-1, 1]"));
}

TEST_CASE("the truth profile matches the quadratic preset flux") {
    const AdmissibleSetSpec truth = presets::truth_spec();
    REQUIRE(evaluate_piecewise_analytic(truth, 0.0) == 1.241);
    REQUIRE_THAT(evaluate_piecewise_analytic(truth, 1.0), WithinRel(0.518, 1e-12));
    REQUIRE_THAT(evaluate_piecewise_analytic(truth, -1.0), WithinRel(0.518, 1e-12));

    const InsolationSpec legendre = insolation_legendre_p2(1.0);
    const Grid grid = build_grid(32, 1.0);
    const std::vector<double> sampled = sample_admissible(truth, grid);
    for (int i = 0; i < grid.n; ++i) {
        REQUIRE_THAT(sampled[i], WithinRel(legendre.q(grid.centers[i]), 1e-13));
        REQUIRE(sampled[i] == evaluate_piecewise_analytic(truth, grid.centers[i]));
    }
}

TEST_CASE("the bump perturbation peaks at its amplitude and leaves the flanks untouched") {
    const AdmissibleSetSpec truth = presets::truth_spec();
    const AdmissibleSetSpec bumped = presets::bump_spec(0.1, 0.2, 0.6);
    REQUIRE(bumped.breakpoints == std::vector<double>{-1.0, 0.2, 0.6, 1.0});

    // peak value: base + amplitude at the midpoint of the support
    REQUIRE_THAT(evaluate_piecewise_analytic(bumped, 0.4),
                 WithinRel(evaluate_piecewise_analytic(truth, 0.4) + 0.1, 1e-12));

    // outside the support the pieces are copies of the base polynomial
    for (double x : {-0.9, -0.3, 0.0, 0.7, 0.95})
        REQUIRE(evaluate_piecewise_analytic(bumped, x) == evaluate_piecewise_analytic(truth, x));

    // value continuity at both edges of the support
    REQUIRE_THAT(evaluate_piecewise_analytic(bumped, 0.2),
                 WithinAbs(evaluate_piecewise_analytic(truth, 0.2), 1e-13));
    REQUIRE_THAT(evaluate_piecewise_analytic(bumped, 0.6),
                 WithinAbs(evaluate_piecewise_analytic(truth, 0.6), 1e-13));

    // slope continuity: one-sided difference quotients agree across each edge
    const double h = 1e-6;
    for (double edge : {0.2, 0.6}) {
        const double left = (evaluate_piecewise_analytic(bumped, edge) -
                             evaluate_piecewise_analytic(bumped, edge - h)) /
                            h;
        const double right = (evaluate_piecewise_analytic(bumped, edge + h) -
                              evaluate_piecewise_analytic(bumped, edge)) /
                             h;
        REQUIRE_THAT(left, WithinAbs(right, 1e-4));
    }

    REQUIRE_THAT(bumped.q_bound, WithinRel(truth.q_bound + 0.1, 1e-12));
    REQUIRE_THROWS_WITH(presets::bumped_spec(truth, 0.1, 0.6, 0.2),
                        ContainsSubstring("need -1 < lo < hi < 1"));
}

TEST_CASE("nodal insolation tables reproduce their values and inherit the seasonal factor") {
    const Grid grid = build_grid(8, 1.0);
    const std::vector<double> q = {0.3, 0.7, 1.1, 0.9, 0.8, 1.0, 0.6, 0.2};
    InsolationSpec seasonal = insolation_legendre_p2(1.0);
    set_seasonal_r(seasonal, 1.0, 0.2, 1.0);

    const InsolationSpec table = insolation_from_values(grid, q, seasonal);
    for (int i = 0; i < grid.n; ++i) REQUIRE(table.q(grid.centers[i]) == q[i]);
    REQUIRE_THAT(table.r(0.25), WithinRel(1.2, 1e-12));
    REQUIRE(table.r_bound == seasonal.r_bound);
    REQUIRE(table.r_prime_bound == seasonal.r_prime_bound);
    REQUIRE(table.q_bound == 1.1);  // max |q| over the nodes
}

TEST_CASE("the pointwise observer samples the snapped cell and its centered slope") {
    const presets::RunPreset preset = presets::inverse_demo(32, 2e-3, 0.2);
    const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, preset.dt);
    const Grid& grid = preset.params.grid;

    const ObservationSet obs = observe_pointwise(traj, grid, 0.3);
    REQUIRE(obs.kind == ObservationKind::pointwise);
    REQUIRE(obs.x0 == 0.3);
    REQUIRE(obs.x0_index == 20);
    REQUIRE(grid.centers[20] == 0.28125);
    REQUIRE(obs.times == traj.times);
    for (size_t k = 0; k < traj.times.size(); ++k) {
        REQUIRE(obs.u_series[k] == traj.states[k][20]);
        REQUIRE(obs.ux_series[k] ==
                (traj.states[k][21] - traj.states[k][19]) / (2.0 * grid.dx));
    }

    REQUIRE_THROWS_WITH(observe_pointwise(traj, grid, 1.0), ContainsSubstring("x0 outside (-1, 1)"));
    REQUIRE_THROWS_WITH(observe_pointwise(traj, grid, -1.0), ContainsSubstring("x0 outside (-1, 1)"));
}

TEST_CASE("observation noise is seeded, bounded, and reproducible") {
    const presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.1);
    const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, preset.dt);
    const Grid& grid = preset.params.grid;

    const ObservationSet clean = observe_pointwise(traj, grid, 0.3);
    const ObservationSet a = observe_pointwise(traj, grid, 0.3, 0.01, 7);
    const ObservationSet b = observe_pointwise(traj, grid, 0.3, 0.01, 7);
    const ObservationSet c = observe_pointwise(traj, grid, 0.3, 0.01, 8);

    REQUIRE(a.u_series == b.u_series);    // same seed, same draw
    REQUIRE(a.ux_series == b.ux_series);
    REQUIRE(a.u_series != c.u_series);    // a different seed separates the draw

    bool any_noise = false;
    for (size_t k = 0; k < clean.u_series.size(); ++k) {
        const double d = std::abs(a.u_series[k] - clean.u_series[k]);
        REQUIRE(d <= 0.01);
        any_noise = any_noise || d > 0.0;
    }
    REQUIRE(any_noise);

    const ObservationSet snap = observe_snapshot(traj, grid, 0.05, 0.01, 11);
    for (size_t i = 0; i < snap.u_snapshot.size(); ++i)
        REQUIRE(std::abs(snap.u_snapshot[i] - traj.states[25][i]) <= 0.01);
    // the diffusion image is derived from the noisy sample, not the clean one
    REQUIRE(snap.opu_snapshot == apply_diffusion(assemble_diffusion(grid), snap.u_snapshot));
}

TEST_CASE("the localized observer collects u_t strictly inside its window") {
    const presets::RunPreset preset = presets::inverse_demo(32, 2e-3, 0.2);
    const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, preset.dt);
    const Grid& grid = preset.params.grid;

    const ObservationSet obs = observe_localized(traj, grid, -0.5, 0.5, 0.0501, 0.1499);
    REQUIRE(obs.kind == ObservationKind::localized);

    // cells: exactly the centers strictly inside (-0.5, 0.5)
    std::vector<int> expected_cells;
    for (int i = 0; i < grid.n; ++i)
        if (-0.5 < grid.centers[i] && grid.centers[i] < 0.5) expected_cells.push_back(i);
    REQUIRE(obs.cells == expected_cells);
    REQUIRE(obs.cells.size() == 16);

    // times: the 49 recorded steps with 0.0501 < t < 0.1499
    REQUIRE(obs.window_times.size() == 49);
    REQUIRE(obs.window_times.front() > 0.0501);
    REQUIRE(obs.window_times.back() < 0.1499);
    REQUIRE(obs.ut_samples.size() == obs.window_times.size());

    // each sample is the centered difference of the recorded states
    const size_t k = 29;  // global index of window_times[3] on the 2e-3 grid
    REQUIRE(traj.times[k] == obs.window_times[3]);
    for (size_t c = 0; c < obs.cells.size(); ++c) {
        const int i = obs.cells[c];
        const double du = (traj.states[k + 1][i] - traj.states[k - 1][i]) / (2.0 * traj.dt);
        REQUIRE(obs.ut_samples[3][c] == du);
    }

    REQUIRE_THROWS_WITH(observe_localized(traj, grid, 0.5, -0.5, 0.05, 0.15),
                        ContainsSubstring("need -1 < a < b < 1"));
    REQUIRE_THROWS_WITH(observe_localized(traj, grid, -0.5, 0.5, 0.15, 0.05),
                        ContainsSubstring("need 0 <= t0 < T"));
    REQUIRE_THROWS_WITH(observe_localized(traj, grid, -0.5, 0.5, 0.1491, 0.1499),
                        ContainsSubstring("no recorded times inside"));
}

TEST_CASE("the snapshot observer returns the recorded state and its diffusion image") {
    const presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.1);
    const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, preset.dt);
    const Grid& grid = preset.params.grid;

    const ObservationSet obs = observe_snapshot(traj, grid, 0.05);
    REQUIRE(obs.kind == ObservationKind::snapshot);
    REQUIRE(obs.T_prime == 0.05);
    REQUIRE(obs.u_snapshot == traj.states[25]);
    REQUIRE(obs.opu_snapshot == apply_diffusion(assemble_diffusion(grid), traj.states[25]));

    REQUIRE_THROWS_WITH(observe_snapshot(traj, grid, 0.0501),
                        ContainsSubstring("not on the recorded grid"));
}

TEST_CASE("direct pointwise inversion recovers the quadratic flux inside the frozen window") {
    const presets::RunPreset preset = presets::inverse_demo(32, 1e-3, 0.2);
    const ModelParams& p = preset.params;
    const Trajectory traj = simulate(p, preset.u0, preset.horizon, preset.dt);

    std::vector<double> q_true(p.grid.n);
    for (int i = 0; i < p.grid.n; ++i) q_true[i] = p.insolation.q(p.grid.centers[i]);

    const ReconstructionResult rec = reconstruct_q_direct(traj, p, 0.1, q_true);
    REQUIRE(rec.q_hat.size() == static_cast<size_t>(p.grid.n));
    REQUIRE(rec.converged);
    REQUIRE(rec.iterations == 0);
    REQUIRE(rec.rel_l2_error.has_value());
    REQUIRE(*rec.rel_l2_error < 1e-2);
    REQUIRE(*rec.rel_l2_error > 0.0);

    // without ground truth the error slot stays empty
    const ReconstructionResult blind = reconstruct_q_direct(traj, p, 0.1);
    REQUIRE_FALSE(blind.rel_l2_error.has_value());
    REQUIRE(blind.q_hat == rec.q_hat);
}

TEST_CASE("direct inversion rejects windows the frozen-memory identity does not cover") {
    const presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.2);
    const ModelParams& p = preset.params;
    const Trajectory traj = simulate(p, preset.u0, preset.horizon, preset.dt);

    REQUIRE_THROWS_WITH(reconstruct_q_direct(traj, p, 0.5),
                        ContainsSubstring("t_eval must be below delta"));

    ModelParams no_dead_zone = p;
    no_dead_zone.kernel = kernel_cosine(1.0, 0.5, 1.0, false);
    REQUIRE_THROWS_WITH(reconstruct_q_direct(traj, no_dead_zone, 0.1),
                        ContainsSubstring("dead-zone support_flag"));

    REQUIRE_THROWS_WITH(reconstruct_q_direct(traj, p, 0.1001),
                        ContainsSubstring("not on the recorded grid"));
    REQUIRE_THROWS_WITH(reconstruct_q_direct(traj, p, 0.0),
                        ContainsSubstring("recorded neighbors"));
    REQUIRE_THROWS_WITH(reconstruct_q_direct(traj, p, 0.2),
                        ContainsSubstring("recorded neighbors"));

    const presets::RunPreset other = presets::inverse_demo(32, 2e-3, 0.2);
    REQUIRE_THROWS_WITH(reconstruct_q_direct(traj, other.params, 0.1),
                        ContainsSubstring("does not match"));
}

TEST_CASE("a vanishing insolation factor makes the division diagnostically unstable") {
    presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.1);
    preset.params.insolation = insolation_constant(1.0, 0.0);  // r identically zero
    const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, preset.dt);

    try {
        reconstruct_q_direct(traj, preset.params, 0.05);
        FAIL("expected a division_unstable_error");
    } catch (const division_unstable_error& e) {
        REQUIRE_THAT(e.what(), ContainsSubstring("|r beta| below floor at cells"));
        REQUIRE(e.cells.size() == 16);  // every cell divides by r beta = 0
        REQUIRE(e.cells.front() == 0);
        REQUIRE(e.cells.back() == 15);
    }
}

TEST_CASE("the variational inversion validates its observation pairing and window") {
    const presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.2);
    const ModelParams& p = preset.params;
    const Trajectory traj = simulate(p, preset.u0, preset.horizon, preset.dt);
    const ObservationSet loc = observe_localized(traj, p.grid, -0.9, 0.9, 0.0501, 0.1499);
    const ObservationSet snap = observe_snapshot(traj, p.grid, 0.1);

    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(snap, snap, p, preset.u0, preset.horizon, preset.dt, 0.0),
        ContainsSubstring("first observation set must be localized"));
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, loc, p, preset.u0, preset.horizon, preset.dt, 0.0),
        ContainsSubstring("second observation set must be snapshot"));
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, snap, p, preset.u0, preset.horizon, preset.dt, -1.0),
        ContainsSubstring("reg_weight must be >= 0"));

    const ObservationSet late = observe_snapshot(traj, p.grid, 0.16);   // beyond T
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, late, p, preset.u0, preset.horizon, preset.dt, 0.0),
        ContainsSubstring("need t0 < T' < T"));
    const ObservationSet early = observe_snapshot(traj, p.grid, 0.02);  // before t0
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, early, p, preset.u0, preset.horizon, preset.dt, 0.0),
        ContainsSubstring("need t0 < T' < T"));

    ModelParams short_delta = p;
    short_delta.kernel = kernel_cosine(1.0, 0.05, 1.0);  // T' = 0.1 >= delta
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, snap, short_delta, preset.u0, preset.horizon, preset.dt, 0.0),
        ContainsSubstring("allow_long_window"));

    LeastSquaresOptions bad_init;
    bad_init.q_init = {1.0, 2.0, 3.0};
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, snap, p, preset.u0, preset.horizon, preset.dt, 0.0, bad_init),
        ContainsSubstring("q_init length does not match the grid"));

    // observations sampled on a finer grid than the solver cannot be matched
    REQUIRE_THROWS_WITH(
        reconstruct_q_leastsq(loc, snap, p, preset.u0, preset.horizon, 4e-3, 0.0),
        ContainsSubstring("observation times not on the solve grid"));
}

TEST_CASE("the long-window override runs the exploratory case instead of rejecting it") {
    presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.2);
    preset.params.kernel = kernel_cosine(1.0, 0.05, 1.0);  // dead zone shorter than T'
    const ModelParams& p = preset.params;
    const Trajectory traj = simulate(p, preset.u0, preset.horizon, preset.dt);
    const ObservationSet loc = observe_localized(traj, p.grid, -0.9, 0.9, 0.0501, 0.1499);
    const ObservationSet snap = observe_snapshot(traj, p.grid, 0.1);

    std::vector<double> q_true(p.grid.n);
    for (int i = 0; i < p.grid.n; ++i) q_true[i] = p.insolation.q(p.grid.centers[i]);

    LeastSquaresOptions opts;
    opts.allow_long_window = true;
    opts.q_init = q_true;  // start at the minimizer: the solver must stop almost immediately
    opts.max_iters = 10;
    const ReconstructionResult res =
        reconstruct_q_leastsq(loc, snap, p, preset.u0, preset.horizon, preset.dt, 0.0, opts, q_true);
    REQUIRE(res.converged);
    REQUIRE(res.iterations <= 5);
    REQUIRE(*res.rel_l2_error < 1e-8);
    REQUIRE(res.residual_norm < 1e-12);
}

TEST_CASE("gradient descent recovers the flux from windowed data on a small grid") {
    const presets::RunPreset preset = presets::inverse_demo(16, 2e-3, 0.2);
    const ModelParams& p = preset.params;
    const Trajectory traj = simulate(p, preset.u0, preset.horizon, preset.dt);
    const ObservationSet loc = observe_localized(traj, p.grid, -0.99, 0.99, 0.0501, 0.1499);
    const ObservationSet snap = observe_snapshot(traj, p.grid, 0.1);

    std::vector<double> q_true(p.grid.n);
    for (int i = 0; i < p.grid.n; ++i) q_true[i] = p.insolation.q(p.grid.centers[i]);

    const ReconstructionResult res =
        reconstruct_q_leastsq(loc, snap, p, preset.u0, preset.horizon, preset.dt, 0.0, {}, q_true);
    REQUIRE(res.converged);
    REQUIRE(res.iterations <= 200);
    REQUIRE(res.rel_l2_error.has_value());
    REQUIRE(*res.rel_l2_error < 1e-2);
    REQUIRE(res.regularization_weight == 0.0);

    // the recorded objective history is the accepted-step sequence: nonincreasing
    REQUIRE(res.objective_history.size() >= 2);
    for (size_t k = 1; k < res.objective_history.size(); ++k)
        REQUIRE(res.objective_history[k] <= res.objective_history[k - 1]);
    REQUIRE(res.residual_norm == res.objective_history.back());
    REQUIRE(res.objective_history.back() < res.objective_history.front());
}

TEST_CASE("identical profiles leave the pointwise probe at exactly zero") {
    const presets::RunPreset preset = presets::inverse_demo(64, 2e-3);
    const AdmissibleSetSpec truth = presets::truth_spec();

    const UniquenessReport rep = uniqueness_experiment(preset.params, truth, truth, preset.u0,
                                                       0.0, 0.4, preset.dt);
    REQUIRE(rep.q_equal);
    REQUIRE(rep.max_discrepancy == 0.0);  // bitwise-identical runs
    REQUIRE(rep.times.size() == 200);     // every step after t = 0
    REQUIRE(rep.discrepancies.size() == rep.times.size());
    for (double d : rep.discrepancies) REQUIRE(d == 0.0);
    REQUIRE(rep.x0_index == 32);
    REQUIRE(rep.x0_snapped == 0.015625);  // nearest center right of the requested x0 = 0
}

TEST_CASE("a localized flux bump separates the pointwise data away from its support") {
    const presets::RunPreset preset = presets::inverse_demo(64, 2e-3);
    const AdmissibleSetSpec truth = presets::truth_spec();
    const AdmissibleSetSpec bumped = presets::bump_spec(0.1, 0.2, 0.6);

    // probe far from the bump support [0.2, 0.6]
    const UniquenessReport rep = uniqueness_experiment(preset.params, truth, bumped, preset.u0,
                                                       -0.6, 0.4, preset.dt);
    REQUIRE_FALSE(rep.q_equal);
    REQUIRE(rep.max_discrepancy >= 1e-6);
    REQUIRE(rep.x0_snapped < -0.55);
    REQUIRE(rep.x0_snapped > -0.65);

    // a tolerance wider than the bump treats the profiles as equal
    const UniquenessReport lax = uniqueness_experiment(preset.params, truth, bumped, preset.u0,
                                                       -0.6, 0.1, preset.dt, 1.0);
    REQUIRE(lax.q_equal);
}

TEST_CASE("the uniqueness probe rejects windows without frozen memory") {
    const presets::RunPreset preset = presets::inverse_demo(32, 2e-3);
    const AdmissibleSetSpec truth = presets::truth_spec();

    REQUIRE_THROWS_WITH(
        uniqueness_experiment(preset.params, truth, truth, preset.u0, 1.0, 0.4, preset.dt),
        ContainsSubstring("x0 outside (-1, 1)"));
    REQUIRE_THROWS_WITH(
        uniqueness_experiment(preset.params, truth, truth, preset.u0, 0.0, 0.5, preset.dt),
        ContainsSubstring("frozen memory"));

    ModelParams full_window = preset.params;
    full_window.kernel = kernel_cosine(1.0, 0.5, 1.0, false);
    REQUIRE_THROWS_WITH(
        uniqueness_experiment(full_window, truth, truth, preset.u0, 0.0, 0.4, preset.dt),
        ContainsSubstring("frozen memory"));
}

namespace {
double shifted_u0(double s, double x) { return presets::u0_inverse(s, x) + 1e-3; }
}  // namespace

TEST_CASE("the stability quotient distinguishes its degenerate denominators") {
    const presets::RunPreset preset = presets::inverse_demo(32, 2e-3);
    const ModelParams& p = preset.params;
    const std::vector<double> q = sample_admissible(presets::truth_spec(), p.grid);
    const std::vector<double> qb = sample_admissible(presets::bump_spec(0.1, 0.2, 0.6), p.grid);

    SECTION("identical runs report zero over zero") {
        const StabilityResult r = stability_ratio(p, q, q, preset.u0, preset.u0,
                                                  0.05, 0.2, 0.4, -0.5, 0.5, preset.dt);
        REQUIRE(r.identical_inputs);
        REQUIRE_FALSE(r.infinite);
        REQUIRE(r.ratio == 0.0);
        REQUIRE(r.numerator == 0.0);
        REQUIRE(r.denominator == 0.0);
        REQUIRE(r.term_snapshot == 0.0);
        REQUIRE(r.term_ut_window == 0.0);
        REQUIRE(r.term_history == 0.0);
    }

    SECTION("distinct profiles with shared initial data have no history term") {
        const StabilityResult r = stability_ratio(p, q, qb, preset.u0, preset.u0,
                                                  0.05, 0.2, 0.4, -0.5, 0.5, preset.dt);
        REQUIRE(r.term_history == 0.0);  // both runs sample the same initial window
        REQUIRE(r.numerator > 0.0);
        REQUIRE(r.term_snapshot > 0.0);
        REQUIRE(r.term_ut_window > 0.0);
        REQUIRE_FALSE(r.identical_inputs);
        REQUIRE_FALSE(r.infinite);
        REQUIRE(std::isfinite(r.ratio));
        REQUIRE_THAT(r.ratio, WithinRel(r.numerator / r.denominator, 1e-15));
        REQUIRE(r.ratio > 0.0);
        REQUIRE(r.ratio < 1e3);
    }

    SECTION("shared profile with different initial data keeps the quotient at zero") {
        const StabilityResult r = stability_ratio(p, q, q, preset.u0, shifted_u0,
                                                  0.05, 0.2, 0.4, -0.5, 0.5, preset.dt);
        REQUIRE(r.numerator == 0.0);
        REQUIRE(r.term_history > 0.0);
        REQUIRE(r.denominator > 0.0);
        REQUIRE(r.ratio == 0.0);
        REQUIRE_FALSE(r.identical_inputs);
        REQUIRE_FALSE(r.infinite);
    }
}

TEST_CASE("the stability quotient validates its observation windows") {
    const presets::RunPreset preset = presets::inverse_demo(16, 2e-3);
    const ModelParams& p = preset.params;
    const std::vector<double> q = sample_admissible(presets::truth_spec(), p.grid);

    REQUIRE_THROWS_WITH(stability_ratio(p, q, q, preset.u0, preset.u0,
                                        0.05, 0.5, 0.6, -0.5, 0.5, preset.dt),
                        ContainsSubstring("need 0 < T' < delta"));
    REQUIRE_THROWS_WITH(stability_ratio(p, q, q, preset.u0, preset.u0,
                                        0.3, 0.2, 0.4, -0.5, 0.5, preset.dt),
                        ContainsSubstring("need t0 in [0, T')"));
    REQUIRE_THROWS_WITH(stability_ratio(p, q, q, preset.u0, preset.u0,
                                        0.05, 0.2, 0.15, -0.5, 0.5, preset.dt),
                        ContainsSubstring("need T > T'"));
    REQUIRE_THROWS_WITH(stability_ratio(p, q, q, preset.u0, preset.u0,
                                        0.05, 0.2, 0.4, 0.5, -0.5, preset.dt),
                        ContainsSubstring("need -1 < a < b < 1"));
}
