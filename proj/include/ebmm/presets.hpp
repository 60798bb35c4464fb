#pragma once

#include <vector>

#include "ebmm/grid.hpp"
#include "ebmm/inverse.hpp"
#include "ebmm/memory.hpp"
#include "ebmm/physics.hpp"

namespace ebmm::presets {

/// A self-contained forward-run configuration: model, initial window, and
/// the run window the scenario was designed for.
struct RunPreset {
    ModelParams params;
    double (*u0)(double s, double x) = nullptr;
    double horizon = 0.0;
    double dt = 0.0;
};

inline double u0_zero(double, double) { return 0.0; }
inline double u0_smooth(double s, double x) { return 0.5 + 0.3 * x - 0.2 * x * x + 0.1 * s; }
inline double u0_inverse(double s, double x) { return 0.3 + 0.2 * x - 0.3 * x * x + 0.1 * s; }
inline double u0_budyko(double s, double x) { return 0.05 - 0.15 * x * x + 0.02 * s; }
inline double u0_warm(double, double) { return 0.5; }

/// Unit-scale quartic-emission run whose a-priori ceiling is exactly 1:
/// q = r = 1, coalbedo reaching 1, epsilon = 1, no memory response, zero
/// initial data. The state rises toward the equilibrium at 1 and may never
/// cross the 5% slack band above it.
inline RunPreset bound_demo() {
    RunPreset p;
    p.params.grid = build_grid(64, 1.0);
    p.params.insolation = insolation_constant(1.0, 1.0);
    p.params.coalbedo = {CoalbedoSpec::Kind::sellers_smooth, 0.2, 1.0, -10.0, 10.0, 0};
    p.params.emission = {};  // quartic, epsilon = 1
    p.params.memory_response = {0.0, 1.0};
    p.params.kernel = kernel_constant(1.0, 0.5, 1.0);
    p.u0 = u0_zero;
    p.horizon = 5.0;
    p.dt = 1e-3;
    return p;
}

/// Small full-featured quartic-emission run (every term active) for the
/// brute-force reference comparison.
inline RunPreset oracle_demo(int n = 6) {
    RunPreset p;
    p.params.grid = build_grid(n, 1.0);
    p.params.insolation = insolation_legendre_p2(1.0);
    set_seasonal_r(p.params.insolation, 1.0, 0.2, 1.0);
    p.params.coalbedo = {CoalbedoSpec::Kind::sellers_smooth, 0.2, 0.8, 0.1, 0.5, 0};
    p.params.emission = {};
    p.params.memory_response = {0.3, 1.0};
    p.params.kernel = kernel_cosine(0.2, 0.1, 1.0);
    p.u0 = u0_smooth;
    p.horizon = 0.1;
    p.dt = 0.02;
    return p;
}

/// Affine-emission run with an ice line: the profile starts slightly above
/// the threshold everywhere, and cells beyond |x| ~ 0.81 (where the absorbed
/// flux cannot sustain the warm branch) descend through the threshold during
/// the run, so the ramp regularization is genuinely exercised.
inline RunPreset budyko_demo(int n = 64) {
    RunPreset p;
    p.params.grid = build_grid(n, 1.0);
    p.params.insolation = insolation_legendre_p2(1.0);
    p.params.coalbedo = {CoalbedoSpec::Kind::budyko_graph, 0.38, 0.68, -0.1, 10.0, 0};
    p.params.emission.kind = EmissionSpec::Kind::budyko;
    p.params.emission.a = 0.55;
    p.params.emission.b = 0.3;
    p.params.memory_response = {0.05, 1.0};
    p.params.kernel = kernel_cosine(1.0, 0.5, 1.0);
    p.u0 = u0_budyko;
    p.horizon = 2.0;
    p.dt = 2e-3;
    return p;
}

inline std::vector<int> budyko_schedule() { return {4, 8, 16, 32, 64, 128, 256}; }

/// Gentle quartic-emission run used by the reconstruction experiments: O(1)
/// state values, coalbedo evaluated on its smooth flank (so r beta stays
/// well away from zero), memory response active.
inline RunPreset inverse_demo(int n = 64, double dt = 1e-3, double horizon = 0.2) {
    RunPreset p;
    p.params.grid = build_grid(n, 1.0);
    p.params.insolation = insolation_legendre_p2(1.0);
    p.params.coalbedo = {CoalbedoSpec::Kind::sellers_smooth, 0.38, 0.68, -0.2, 1.0, 0};
    p.params.emission = {};
    p.params.memory_response = {0.2, 1.0};
    p.params.kernel = kernel_cosine(1.0, 0.5, 1.0);
    p.u0 = u0_inverse;
    p.horizon = horizon;
    p.dt = dt;
    return p;
}

namespace detail {
inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}
inline void poly_axpy(std::vector<double>& acc, double scale, const std::vector<double>& p) {
    if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
    for (size_t i = 0; i < p.size(); ++i) acc[i] += scale * p[i];
}
}  // namespace detail

/// The insolation profile the inverse presets treat as ground truth,
/// written as a single polynomial piece: 1.241 - 0.723 x^2 (the quadratic
/// flux shape used across the forward presets).
inline AdmissibleSetSpec truth_spec() {
    AdmissibleSetSpec spec;
    spec.breakpoints = {-1.0, 1.0};
    spec.piece_coeffs = {{1.241, 0.0, -0.723}};
    spec.q_bound = 1.241;
    spec.u0_bound = 0.4;
    return spec;
}

/// Base profile plus a C^1 bump of the given peak amplitude supported on
/// [lo, hi]: amplitude * 16 * (z(1-z))^2 with z = (x-lo)/(hi-lo). The bump
/// vanishes with zero slope at both ends, so the perturbed profile stays
/// Lipschitz across the breakpoints. The base must be a single polynomial
/// piece.
inline AdmissibleSetSpec bumped_spec(const AdmissibleSetSpec& base, double amplitude, double lo,
                                     double hi) {
    if (!(-1.0 < lo && lo < hi && hi < 1.0))
        throw std::invalid_argument("bumped_spec: need -1 < lo < hi < 1");
    if (base.piece_coeffs.size() != 1)
        throw std::invalid_argument("bumped_spec: base profile must be a single polynomial piece");
    const double w = hi - lo;
    const std::vector<double> z = {-lo / w, 1.0 / w};
    std::vector<double> p = z;                                   // z
    detail::poly_axpy(p, -1.0, detail::poly_mul(z, z));          // z - z^2
    std::vector<double> bump = detail::poly_mul(p, p);           // (z(1-z))^2
    for (double& c : bump) c *= 16.0 * amplitude;

    AdmissibleSetSpec spec;
    spec.breakpoints = {-1.0, lo, hi, 1.0};
    std::vector<double> mid = base.piece_coeffs[0];
    detail::poly_axpy(mid, 1.0, bump);
    spec.piece_coeffs = {base.piece_coeffs[0], mid, base.piece_coeffs[0]};
    spec.q_bound = base.q_bound + std::abs(amplitude);
    spec.u0_bound = base.u0_bound;
    return spec;
}

/// Truth profile with the standard bump perturbation.
inline AdmissibleSetSpec bump_spec(double amplitude, double lo, double hi) {
    return bumped_spec(truth_spec(), amplitude, lo, hi);
}

}  // namespace ebmm::presets
