#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ebmm/grid.hpp"
#include "ebmm/memory.hpp"
#include "ebmm/physics.hpp"
#include "ebmm/presets.hpp"
#include "ebmm/stepper.hpp"

/// Independent reference implementations (dense assembly, dense solves, a
/// matrix-exponential reference integrator) and the invariant suites built
/// on them. Everything here is deliberately brute force: it cross-checks
/// the production paths and must not share their shortcuts.
namespace ebmm::checks {

using Matrix = std::vector<std::vector<double>>;

/// Dense flux-form assembly of u -> (rho u_x)_x, written directly from the
/// face balance (zero flux through the boundary faces) rather than reusing
/// the tridiagonal assembly.
inline Matrix dense_diffusion(const Grid& grid) {
    const int n = grid.n;
    Matrix A(n, std::vector<double>(n, 0.0));
    for (int f = 1; f < n; ++f) {  // interior faces only; boundary fluxes vanish
        const double c = grid.rho_at_faces[f] / (grid.dx * grid.dx);
        A[f - 1][f - 1] -= c;
        A[f - 1][f] += c;
        A[f][f - 1] += c;
        A[f][f] -= c;
    }
    return A;
}

inline std::vector<double> dense_apply(const Matrix& A, const std::vector<double>& v) {
    std::vector<double> out(A.size(), 0.0);
    for (size_t i = 0; i < A.size(); ++i)
        for (size_t j = 0; j < v.size(); ++j) out[i] += A[i][j] * v[j];
    return out;
}

inline Matrix identity(int n) {
    Matrix I(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) I[i][i] = 1.0;
    return I;
}

inline double dense_inf_norm(const Matrix& A) {
    double norm = 0.0;
    for (const auto& row : A) {
        double s = 0.0;
        for (double v : row) s += std::abs(v);
        norm = std::max(norm, s);
    }
    return norm;
}

/// Gaussian elimination with partial pivoting (A and b taken by value).
inline std::vector<double> dense_solve(Matrix A, std::vector<double> b) {
    const int n = static_cast<int>(A.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[pivot][col])) pivot = r;
        std::swap(A[col], A[pivot]);
        std::swap(b[col], b[pivot]);
        if (A[col][col] == 0.0) throw std::invalid_argument("dense_solve: singular matrix");
        for (int r = col + 1; r < n; ++r) {
            const double factor = A[r][col] / A[col][col];
            for (int c = col; c < n; ++c) A[r][c] -= factor * A[col][c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    return x;
}

inline Matrix dense_mul(const Matrix& A, const Matrix& B) {
    const size_t n = A.size();
    Matrix C(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < n; ++k) {
            const double a = A[i][k];
            if (a == 0.0) continue;
            for (size_t j = 0; j < n; ++j) C[i][j] += a * B[k][j];
        }
    return C;
}

/// Matrix exponential by scaling and squaring with a Taylor series run to
/// machine-precision stagnation on the scaled matrix.
inline Matrix dense_expm(const Matrix& A) {
    const int n = static_cast<int>(A.size());
    int squarings = 0;
    double norm = dense_inf_norm(A);
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    Matrix B(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B[i][j] = A[i][j] * scale;

    Matrix E = identity(n);
    Matrix term = identity(n);
    for (int k = 1; k <= 60; ++k) {
        term = dense_mul(term, B);
        for (auto& row : term)
            for (double& v : row) v /= k;
        double tnorm = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                E[i][j] += term[i][j];
                tnorm = std::max(tnorm, std::abs(term[i][j]));
            }
        if (tnorm < 1e-19 * std::max(1.0, dense_inf_norm(E))) break;
    }
    for (int s = 0; s < squarings; ++s) E = dense_mul(E, E);
    return E;
}

/// Brute-force reference integrator: exact dense propagator for the
/// diffusion part, explicit-rectangle treatment of the reaction/memory term
/// (u <- e^{dt A}(u + dt g)). Shares the history quadrature with the
/// production stepper so the comparison isolates the time-splitting error.
template <typename F>
std::vector<double> reference_final_state(const ModelParams& params, F&& u0, double horizon, double dt) {
    const Grid& grid = params.grid;
    const int n = grid.n;
    const Matrix E = dense_expm([&] {
        Matrix A = dense_diffusion(grid);
        for (auto& row : A)
            for (double& v : row) v *= dt;
        return A;
    }());
    HistoryBuffer buf = init_history(std::forward<F>(u0), grid, dt, params.kernel.tau);
    const HistoryWeights weights = make_history_weights(params.kernel, grid, dt, buf.m);
    const long long steps = std::llround(horizon / dt);
    std::vector<double> u = buf.slot(buf.m);
    for (long long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const std::vector<double> H = eval_history(buf, weights, n);
        const std::vector<double> g = rhs(t, u, H, params);
        std::vector<double> w(n);
        for (int i = 0; i < n; ++i) w[i] = u[i] + dt * g[i];
        u = dense_apply(E, w);
        push_state(buf, u, static_cast<double>(k + 1) * dt);
    }
    return u;
}

// ---------------------------------------------------------------------------
// Invariant suites (shared by the CLI verify command and the test gate)
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline std::vector<CheckResult> operator_suite(unsigned seed = 20240901) {
    std::vector<CheckResult> results;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int n : {4, 8, 16, 64}) {
        const Grid grid = build_grid(n, 1.0);
        const DiffusionOperator op = assemble_diffusion(grid);
        const std::string tag = "n=" + std::to_string(n);

        double sym = 0.0;
        for (int i = 0; i + 1 < n; ++i) sym = std::max(sym, std::abs(op.sub[i] - op.sup[i]));
        results.push_back({"operator symmetry " + tag, sym == 0.0,
                           "max |sub-sup| = " + std::to_string(sym)});

        const double opnorm = operator_inf_norm(op);
        double worst_rs = 0.0;
        for (int i = 0; i < n; ++i) {
            double rs = op.diag[i];
            if (i > 0) rs += op.sub[i - 1];
            if (i + 1 < n) rs += op.sup[i];
            worst_rs = std::max(worst_rs, std::abs(rs));
        }
        results.push_back({"operator row sums " + tag, worst_rs <= 1e-12 * opnorm,
                           "max |row sum| = " + std::to_string(worst_rs)});

        double worst_quad = -1.0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> v(n);
            for (double& x : v) x = dist(rng);
            const std::vector<double> Av = apply_diffusion(op, v);
            double quad = 0.0;
            for (int i = 0; i < n; ++i) quad += v[i] * Av[i];
            worst_quad = std::max(worst_quad, quad);
        }
        results.push_back({"operator negativity " + tag, worst_quad <= 0.0,
                           "max v.Opv = " + std::to_string(worst_quad)});

        if (n <= 8) {
            const Matrix A = dense_diffusion(grid);
            double worst_apply = 0.0, worst_solve = 0.0;
            for (int trial = 0; trial < 5; ++trial) {
                std::vector<double> v(n);
                for (double& x : v) x = dist(rng);
                const std::vector<double> sparse = apply_diffusion(op, v);
                const std::vector<double> dense = dense_apply(A, v);
                double diff = 0.0, ref = 0.0;
                for (int i = 0; i < n; ++i) {
                    diff = std::max(diff, std::abs(sparse[i] - dense[i]));
                    ref = std::max(ref, std::abs(dense[i]));
                }
                worst_apply = std::max(worst_apply, diff / std::max(ref, 1e-300));

                const double dt = 0.1;
                Matrix M = identity(n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) M[i][j] -= dt * A[i][j];
                const std::vector<double> thomas = solve_implicit(op, v, dt);
                const std::vector<double> lu = dense_solve(M, v);
                diff = 0.0;
                ref = 0.0;
                for (int i = 0; i < n; ++i) {
                    diff = std::max(diff, std::abs(thomas[i] - lu[i]));
                    ref = std::max(ref, std::abs(lu[i]));
                }
                worst_solve = std::max(worst_solve, diff / std::max(ref, 1e-300));
            }
            results.push_back({"operator dense apply " + tag, worst_apply <= 1e-12,
                               "rel diff = " + std::to_string(worst_apply)});
            results.push_back({"operator dense solve " + tag, worst_solve <= 1e-12,
                               "rel diff = " + std::to_string(worst_solve)});
        }
    }
    return results;
}

inline std::vector<CheckResult> bounds_suite() {
    std::vector<CheckResult> results;
    const presets::RunPreset preset = presets::bound_demo();
    const double ceiling = linf_bound(preset.params, 0.0);
    try {
        const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, preset.dt);
        const bool ok = traj.sup_norm_seen <= 1.05 * ceiling;
        results.push_back({"sup-norm ceiling", ok,
                           "sup_norm_seen = " + std::to_string(traj.sup_norm_seen) + ", ceiling = " +
                               std::to_string(ceiling)});
    } catch (const bound_violation_error& e) {
        results.push_back({"sup-norm ceiling", false, e.what()});
    }
    return results;
}

inline std::vector<CheckResult> oracle_suite() {
    std::vector<CheckResult> results;
    const presets::RunPreset preset = presets::oracle_demo(6);
    const auto gap_at = [&](double dt) {
        const Trajectory traj = simulate(preset.params, preset.u0, preset.horizon, dt);
        const std::vector<double> ref = reference_final_state(preset.params, preset.u0, preset.horizon, dt);
        double gap = 0.0;
        for (int i = 0; i < preset.params.grid.n; ++i)
            gap = std::max(gap, std::abs(traj.states.back()[i] - ref[i]));
        return gap;
    };
    const double coarse = gap_at(preset.dt);
    const double fine = gap_at(preset.dt / 2.0);
    const double ratio = coarse / fine;
    const bool ok = ratio >= 1.7 && ratio <= 2.5;
    results.push_back({"splitting order vs reference", ok,
                       "gap(dt) = " + std::to_string(coarse) + ", gap(dt/2) = " + std::to_string(fine) +
                           ", ratio = " + std::to_string(ratio)});
    return results;
}

inline std::vector<CheckResult> run_suite(const std::string& name) {
    if (name == "operator") return operator_suite();
    if (name == "bounds") return bounds_suite();
    if (name == "oracle") return oracle_suite();
    if (name == "all") {
        std::vector<CheckResult> all = operator_suite();
        for (auto& r : bounds_suite()) all.push_back(std::move(r));
        for (auto& r : oracle_suite()) all.push_back(std::move(r));
        return all;
    }
    throw std::invalid_argument("unknown suite: " + name + " (expected operator|bounds|oracle|all)");
}

}  // namespace ebmm::checks
