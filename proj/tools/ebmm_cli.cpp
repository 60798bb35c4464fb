// Command-line front end: simulation, set-valued regularization, source
// inversion, uniqueness/stability probes, and the built-in check suites.
//
// Exit codes: 0 success, 1 validation or model error (message verbatim on
// stderr), 2 usage errors (bad flags, missing files).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ebmm/checks.hpp"
#include "ebmm/ebmm.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return ebmm::detail_io::format_value(v); }

ebmm::StepperOptions stepper_options(const ebmm::Scenario& s) {
    ebmm::StepperOptions opts;
    opts.scheme = s.scheme == "crank_nicolson" ? ebmm::Scheme::crank_nicolson
                                               : ebmm::Scheme::backward_euler;
    opts.stride = s.stride;
    return opts;
}

double initial_sup(const ebmm::ModelParams& params, const std::function<double(double, double)>& u0) {
    double sup = 0.0;
    for (double x : params.grid.centers) sup = std::max(sup, std::abs(u0(0.0, x)));
    return sup;
}

/// The insolation profile as a single-piece admissible polynomial, for the
/// experiments that perturb q analytically.
ebmm::AdmissibleSetSpec admissible_from_scenario(const ebmm::Scenario& s,
                                                 const std::function<double(double, double)>& u0,
                                                 const ebmm::ModelParams& params) {
    ebmm::AdmissibleSetSpec spec;
    spec.breakpoints = {-1.0, 1.0};
    if (s.q_kind == "constant")
        spec.piece_coeffs = {{s.q_value}};
    else if (s.q_kind == "legendre_p2")
        spec.piece_coeffs = {{1.241 * s.q_scale, 0.0, -0.723 * s.q_scale}};
    else
        throw ebmm::validation_error(
            "this command needs a polynomial insolation profile (q kind constant or legendre_p2)");
    spec.q_bound = params.insolation.q_bound;
    spec.u0_bound = initial_sup(params, u0);
    return spec;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    ebmm::detail_io::write_file_atomic(path, j.dump(2) + "\n");
}

int cmd_simulate(const fs::path& scenario_path, const fs::path& out) {
    const ebmm::Scenario s = ebmm::load_scenario(scenario_path);
    const ebmm::ModelParams params = ebmm::build_params(s, scenario_path.parent_path());
    const auto u0 = ebmm::build_u0(s);
    const double dt = ebmm::select_dt(s.tau, s.delta, s.horizon, s.target_dt);

    const ebmm::Trajectory traj = ebmm::simulate(params, u0, s.horizon, dt, stepper_options(s));
    fs::create_directories(out);
    ebmm::write_trajectory(out / "trajectory", traj);
    write_json(out / "config.json", ebmm::effective_config(s));

    nlohmann::json summary;
    summary["dt"] = dt;
    summary["steps"] = static_cast<long long>(std::llround(s.horizon / dt));
    summary["sup_norm_seen"] = traj.sup_norm_seen;
    if (params.emission.kind == ebmm::EmissionSpec::Kind::sellers) {
        const double bound = ebmm::linf_bound(params, initial_sup(params, u0));
        summary["bound"] = bound;
        summary["margin"] = bound - traj.sup_norm_seen;
    } else {
        summary["bound"] = nullptr;
        summary["margin"] = nullptr;
    }
    write_json(out / "summary.json", summary);

    std::cout << "simulate: wrote " << out.string() << "; sup_norm_seen=" << fmt(traj.sup_norm_seen);
    if (summary["bound"].is_number())
        std::cout << "; bound=" << fmt(summary["bound"].get<double>())
                  << "; margin=" << fmt(summary["margin"].get<double>());
    std::cout << "\n";
    return 0;
}

int cmd_budyko(const fs::path& scenario_path, const fs::path& out, const double* tol_override) {
    const ebmm::Scenario s = ebmm::load_scenario(scenario_path);
    const ebmm::ModelParams params = ebmm::build_params(s, scenario_path.parent_path());
    const auto u0 = ebmm::build_u0(s);
    const double dt = ebmm::select_dt(s.tau, s.delta, s.horizon, s.target_dt);

    ebmm::BudykoOptions opts;
    opts.tol = tol_override ? *tol_override : s.budyko_tol;
    opts.band_tol = s.band_tol;
    opts.value_tol = s.value_tol;
    opts.stop_early = s.stop_early;
    opts.stepper = stepper_options(s);

    const ebmm::BudykoSolution sol = ebmm::solve_budyko(params, u0, s.horizon, dt, s.j_schedule, opts);

    fs::create_directories(out);
    ebmm::write_trajectory(out / "trajectory", sol.trajectory);
    write_json(out / "config.json", ebmm::effective_config(s));

    std::string gaps = "j,gap\n";
    for (size_t k = 1; k < sol.js.size(); ++k)
        gaps += std::to_string(sol.js[k]) + "," + fmt(sol.gaps[k - 1]) + "\n";
    ebmm::detail_io::write_file_atomic(out / "gaps.csv", gaps);

    std::string gamma = ebmm::detail_io::state_header("time", sol.trajectory.n);
    for (size_t k = 0; k < sol.gamma.size(); ++k)
        ebmm::detail_io::append_row(gamma, sol.trajectory.times[k], sol.gamma[k]);
    ebmm::detail_io::write_file_atomic(out / "gamma.csv", gamma);

    nlohmann::json report = ebmm::inclusion_report_json(sol.inclusion_report);
    report["j_final"] = sol.j_final;
    report["cauchy_gap"] = sol.cauchy_gap;
    report["converged"] = sol.converged;
    write_json(out / "inclusion.json", report);

    std::cout << "budyko: converged at j=" << sol.j_final << "; cauchy_gap=" << fmt(sol.cauchy_gap)
              << "; inclusion violations=" << sol.inclusion_report.violations.size() << "\n";
    return 0;
}

int cmd_invert(const fs::path& scenario_path, const fs::path& out, const std::string& mode,
               std::vector<double> noise, const double* reg_override) {
    const ebmm::Scenario s = ebmm::load_scenario(scenario_path);
    const ebmm::ModelParams params = ebmm::build_params(s, scenario_path.parent_path());
    const auto u0 = ebmm::build_u0(s);
    const double dt = ebmm::select_dt(s.tau, s.delta, s.horizon, s.target_dt);
    if (noise.empty()) noise.push_back(0.0);

    std::vector<double> q_true(params.grid.n);
    for (int i = 0; i < params.grid.n; ++i) q_true[i] = params.insolation.q(params.grid.centers[i]);

    ebmm::StepperOptions run_opts = stepper_options(s);
    run_opts.stride = 1;  // observation windows need every step
    const ebmm::Trajectory traj = ebmm::simulate(params, u0, s.horizon, dt, run_opts);

    fs::create_directories(out);
    write_json(out / "config.json", ebmm::effective_config(s));

    const double reg = reg_override ? *reg_override : s.reg_weight;
    std::string sweep = "noise,rel_l2_error,residual_norm,iterations\n";
    for (size_t k = 0; k < noise.size(); ++k) {
        ebmm::ReconstructionResult res;
        if (mode == "direct") {
            ebmm::Trajectory observed = traj;
            if (noise[k] > 0.0) observed.states = ebmm::detail::noisy_states(traj, noise[k], s.seed);
            res = ebmm::reconstruct_q_direct(observed, params, s.t_eval, q_true);
        } else {
            const ebmm::ObservationSet localized = ebmm::observe_localized(
                traj, params.grid, s.window_a, s.window_b, s.t0, s.horizon, noise[k], s.seed);
            const ebmm::ObservationSet snapshot =
                ebmm::observe_snapshot(traj, params.grid, s.T_prime, noise[k], s.seed + 1);
            ebmm::LeastSquaresOptions opts;
            opts.max_iters = s.max_iters;
            res = ebmm::reconstruct_q_leastsq(localized, snapshot, params, u0, s.horizon, dt, reg,
                                              opts, q_true);
            if (noise.size() == 1) {
                ebmm::write_observations(out / "observations_localized", localized);
                ebmm::write_observations(out / "observations_snapshot", snapshot);
            }
        }
        const fs::path dir = noise.size() == 1 ? out : out / ("noise_" + std::to_string(k));
        ebmm::write_reconstruction(dir, res, params.grid, q_true);
        sweep += fmt(noise[k]) + "," + fmt(res.rel_l2_error ? *res.rel_l2_error : -1.0) + "," +
                 fmt(res.residual_norm) + "," + std::to_string(res.iterations) + "\n";
        std::cout << "invert(" << mode << "): noise=" << fmt(noise[k])
                  << "; rel_l2_error=" << fmt(res.rel_l2_error ? *res.rel_l2_error : -1.0)
                  << "; iterations=" << res.iterations << "\n";
    }
    if (noise.size() > 1) ebmm::detail_io::write_file_atomic(out / "sweep.csv", sweep);
    return 0;
}

int cmd_uniqueness(const fs::path& scenario_path, const fs::path& out, double x0) {
    const ebmm::Scenario s = ebmm::load_scenario(scenario_path);
    const ebmm::ModelParams params = ebmm::build_params(s, scenario_path.parent_path());
    const auto u0 = ebmm::build_u0(s);
    const double dt = ebmm::select_dt(s.tau, s.delta, s.horizon, s.target_dt);

    const ebmm::AdmissibleSetSpec q_spec = admissible_from_scenario(s, u0, params);
    const ebmm::AdmissibleSetSpec q_tilde_spec =
        ebmm::presets::bumped_spec(q_spec, s.perturb_amplitude, s.perturb_lo, s.perturb_hi);

    const ebmm::UniquenessReport rep =
        ebmm::uniqueness_experiment(params, q_spec, q_tilde_spec, u0, x0, s.horizon, dt);

    fs::create_directories(out);
    write_json(out / "config.json", ebmm::effective_config(s));
    std::string csv = "time,discrepancy\n";
    for (size_t k = 0; k < rep.times.size(); ++k)
        csv += fmt(rep.times[k]) + "," + fmt(rep.discrepancies[k]) + "\n";
    ebmm::detail_io::write_file_atomic(out / "discrepancy.csv", csv);
    write_json(out / "report.json",
               {{"x0_requested", rep.x0_requested},
                {"x0_snapped", rep.x0_snapped},
                {"x0_index", rep.x0_index},
                {"max_discrepancy", rep.max_discrepancy},
                {"q_equal", rep.q_equal}});

    std::cout << "uniqueness: x0=" << fmt(rep.x0_snapped)
              << "; max_discrepancy=" << fmt(rep.max_discrepancy) << "; verdict="
              << (rep.q_equal ? "profiles equal, discrepancy identically zero"
                              : (rep.max_discrepancy > 0.0
                                     ? "distinct profiles separate the point observations"
                                     : "distinct profiles NOT separated (unexpected)"))
              << "\n";
    return 0;
}

int cmd_stability(const fs::path& scenario_path, const fs::path& out, std::vector<double> sweep) {
    const ebmm::Scenario s = ebmm::load_scenario(scenario_path);
    const ebmm::ModelParams params = ebmm::build_params(s, scenario_path.parent_path());
    const auto u0 = ebmm::build_u0(s);
    const double dt = ebmm::select_dt(s.tau, s.delta, s.horizon, s.target_dt);
    if (sweep.empty()) sweep = {1e-3, 1e-2, 1e-1};

    const ebmm::AdmissibleSetSpec base = admissible_from_scenario(s, u0, params);
    const std::vector<double> q = ebmm::sample_admissible(base, params.grid);

    fs::create_directories(out);
    write_json(out / "config.json", ebmm::effective_config(s));
    std::string csv = "amplitude,ratio,numerator,denominator,term_snapshot,term_ut_window,term_history\n";
    for (double amp : sweep) {
        const ebmm::AdmissibleSetSpec tilde =
            ebmm::presets::bumped_spec(base, amp, s.perturb_lo, s.perturb_hi);
        const std::vector<double> qt = ebmm::sample_admissible(tilde, params.grid);
        const ebmm::StabilityResult r = ebmm::stability_ratio(
            params, q, qt, u0, u0, s.t0, s.T_prime, s.horizon, s.window_a, s.window_b, dt);
        csv += fmt(amp) + "," + fmt(r.ratio) + "," + fmt(r.numerator) + "," + fmt(r.denominator) +
               "," + fmt(r.term_snapshot) + "," + fmt(r.term_ut_window) + "," +
               fmt(r.term_history) + "\n";
        std::cout << "stability: amplitude=" << fmt(amp) << "; ratio=" << fmt(r.ratio) << "\n";
    }
    ebmm::detail_io::write_file_atomic(out / "ratios.csv", csv);
    return 0;
}

int cmd_verify(const std::string& suite) {
    const std::vector<ebmm::checks::CheckResult> results = ebmm::checks::run_suite(suite);
    bool all_pass = true;
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    }
    std::cout << (all_pass ? "verify: all checks passed\n" : "verify: FAILURES detected\n");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy balance models with memory: forward solves, set-valued regularization, "
                 "and insolation-source inversion"};
    app.require_subcommand(1);

    std::string scenario;
    std::string out = "out";
    std::string mode = "direct";
    std::string suite = "all";
    double tol = 0.0, reg = 0.0, x0 = 0.0;
    std::vector<double> noise, sweep;
    bool tol_set = false, reg_set = false;

    auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "Scenario configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory");
    };

    CLI::App* sim = app.add_subcommand("simulate", "Run a forward solve and write the trajectory");
    add_scenario(sim);

    CLI::App* bud = app.add_subcommand(
        "budyko", "Run the coalbedo-regularization ramp and the inclusion check");
    add_scenario(bud);
    bud->add_option("--tol", tol, "Cauchy-gap tolerance override")->each([&](const std::string&) {
        tol_set = true;
    });

    CLI::App* inv = app.add_subcommand("invert", "Reconstruct the insolation profile q(x)");
    add_scenario(inv);
    inv->add_option("--mode", mode, "Reconstruction mode")
        ->check(CLI::IsMember({"direct", "leastsq"}));
    inv->add_option("--noise", noise, "Observation noise level(s); a list makes a sweep table");
    inv->add_option("--reg", reg, "Regularization weight override")->each([&](const std::string&) {
        reg_set = true;
    });

    CLI::App* uni = app.add_subcommand(
        "uniqueness", "Discrepancy series at one point for two insolation profiles");
    add_scenario(uni);
    uni->add_option("--x0", x0, "Observation point in (-1, 1)");

    CLI::App* sta = app.add_subcommand("stability", "Stability-quotient table over bump amplitudes");
    add_scenario(sta);
    sta->add_option("--sweep", sweep, "Bump amplitudes to sweep");

    CLI::App* ver = app.add_subcommand("verify", "Run the built-in invariant check suites");
    ver->add_option("--suite", suite, "Which suite to run")
        ->check(CLI::IsMember({"operator", "bounds", "oracle", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(scenario, out);
        if (bud->parsed()) return cmd_budyko(scenario, out, tol_set ? &tol : nullptr);
        if (inv->parsed()) return cmd_invert(scenario, out, mode, noise, reg_set ? &reg : nullptr);
        if (uni->parsed()) return cmd_uniqueness(scenario, out, x0);
        if (sta->parsed()) return cmd_stability(scenario, out, sweep);
        if (ver->parsed()) return cmd_verify(suite);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
