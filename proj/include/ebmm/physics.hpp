#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebmm/grid.hpp"
#include "ebmm/memory.hpp"

namespace ebmm {

/// Insolation profile q(x) times the seasonal factor r(t).
struct InsolationSpec {
    enum class QKind { constant, legendre_p2, table };
    enum class RKind { constant, seasonal };

    QKind q_kind = QKind::constant;
    double q_value = 1.0;              // constant preset
    double q_scale = 1.0;              // legendre_p2 preset: q(x) = scale*(1 - 0.482*P2(x))
    std::vector<double> q_x, q_y;      // table preset, linear interpolation

    RKind r_kind = RKind::constant;
    double r_value = 1.0;
    double r_amplitude = 0.0;          // seasonal preset: r(t) = value*(1 + amplitude*sin(2 pi t/period))
    double r_period = 1.0;

    double q_bound = 1.0;
    double r_bound = 1.0;
    double r_prime_bound = 0.0;

    double q(double x) const {
        switch (q_kind) {
            case QKind::constant: return q_value;
            case QKind::legendre_p2: return q_scale * (1.0 - 0.482 * 0.5 * (3.0 * x * x - 1.0));
            case QKind::table: {
                if (x <= q_x.front()) return q_y.front();
                if (x >= q_x.back()) return q_y.back();
                const size_t hi = std::upper_bound(q_x.begin(), q_x.end(), x) - q_x.begin();
                const double w = (x - q_x[hi - 1]) / (q_x[hi] - q_x[hi - 1]);
                return (1.0 - w) * q_y[hi - 1] + w * q_y[hi];
            }
        }
        return 0.0;
    }

    double r(double t) const {
        if (r_kind == RKind::constant) return r_value;
        return r_value * (1.0 + r_amplitude * std::sin(2.0 * M_PI * t / r_period));
    }
};

inline InsolationSpec insolation_constant(double q_value, double r_value = 1.0) {
    InsolationSpec s;
    s.q_kind = InsolationSpec::QKind::constant;
    s.q_value = q_value;
    s.r_value = r_value;
    s.q_bound = std::abs(q_value);
    s.r_bound = std::abs(r_value);
    return s;
}

inline InsolationSpec insolation_legendre_p2(double scale, double r_value = 1.0) {
    InsolationSpec s;
    s.q_kind = InsolationSpec::QKind::legendre_p2;
    s.q_scale = scale;
    s.r_value = r_value;
    s.q_bound = std::abs(scale) * 1.241;  // max over [-1,1] of |1 - 0.482*P2|
    s.r_bound = std::abs(r_value);
    return s;
}

inline InsolationSpec insolation_table(std::vector<double> x, std::vector<double> y, double r_value = 1.0) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("insolation_table: need matching x/y with at least two nodes");
    InsolationSpec s;
    s.q_kind = InsolationSpec::QKind::table;
    s.q_x = std::move(x);
    s.q_y = std::move(y);
    s.r_value = r_value;
    s.q_bound = 0.0;
    for (double v : s.q_y) s.q_bound = std::max(s.q_bound, std::abs(v));
    s.r_bound = std::abs(r_value);
    return s;
}

inline void set_seasonal_r(InsolationSpec& s, double r_value, double amplitude, double period) {
    s.r_kind = InsolationSpec::RKind::seasonal;
    s.r_value = r_value;
    s.r_amplitude = amplitude;
    s.r_period = period;
    s.r_bound = std::abs(r_value) * (1.0 + std::abs(amplitude));
    s.r_prime_bound = std::abs(r_value * amplitude) * 2.0 * M_PI / period;
}

/// Coalbedo: fraction of incoming flux absorbed, between a_i (iced) and a_f
/// (ice-free), switching around the threshold temperature u_bar.
struct CoalbedoSpec {
    enum class Kind { sellers_smooth, budyko_graph, budyko_regularized };

    Kind kind = Kind::sellers_smooth;
    double a_i = 0.38;
    double a_f = 0.68;
    double u_bar = -10.0;
    double width = 10.0;  // sellers_smooth transition half-width
    int j = 0;            // budyko_regularized ramp parameter: half-width 1/j
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

namespace detail {
/// C2 quintic smoothstep: 0 for z <= 0, 1 for z >= 1, 6z^5 - 15z^4 + 10z^3 between.
inline double smoothstep_quintic(double z) {
    if (z <= 0.0) return 0.0;
    if (z >= 1.0) return 1.0;
    return z * z * z * (10.0 + z * (-15.0 + 6.0 * z));
}
inline double smoothstep_quintic_deriv(double z) {
    if (z <= 0.0 || z >= 1.0) return 0.0;
    return 30.0 * z * z * (1.0 - z) * (1.0 - z);
}
/// C1 cubic smoothstep: 0 for z <= 0, 1 for z >= 1, z^2(3 - 2z) between.
inline double smoothstep_cubic(double z) {
    if (z <= 0.0) return 0.0;
    if (z >= 1.0) return 1.0;
    return z * z * (3.0 - 2.0 * z);
}
}  // namespace detail

/// Single-valued coalbedo evaluation. The set-valued budyko_graph kind is
/// only admissible away from the threshold; at u == u_bar use coalbedo_set.
inline double coalbedo(const CoalbedoSpec& spec, double u) {
    switch (spec.kind) {
        case CoalbedoSpec::Kind::sellers_smooth: {
            const double z = 0.5 * ((u - spec.u_bar) / spec.width + 1.0);
            return spec.a_i + (spec.a_f - spec.a_i) * detail::smoothstep_quintic(z);
        }
        case CoalbedoSpec::Kind::budyko_graph:
            if (u < spec.u_bar) return spec.a_i;
            if (u > spec.u_bar) return spec.a_f;
            throw std::invalid_argument("coalbedo: budyko_graph is set-valued at the threshold; use coalbedo_set");
        case CoalbedoSpec::Kind::budyko_regularized: {
            if (spec.j < 1) throw std::invalid_argument("coalbedo: budyko_regularized needs j >= 1");
            const double z = 0.5 * ((u - spec.u_bar) * spec.j + 1.0);
            return spec.a_i + (spec.a_f - spec.a_i) * detail::smoothstep_cubic(z);
        }
    }
    return 0.0;
}

/// Set-valued coalbedo; a degenerate interval except for budyko_graph at u_bar.
inline Interval coalbedo_set(const CoalbedoSpec& spec, double u) {
    if (spec.kind == CoalbedoSpec::Kind::budyko_graph && u == spec.u_bar) return {spec.a_i, spec.a_f};
    const double v = coalbedo(spec, u);
    return {v, v};
}

/// Analytic derivative of the single-valued kinds (finite-difference checks
/// pin this down in the tests).
inline double coalbedo_derivative(const CoalbedoSpec& spec, double u) {
    switch (spec.kind) {
        case CoalbedoSpec::Kind::sellers_smooth: {
            const double z = 0.5 * ((u - spec.u_bar) / spec.width + 1.0);
            return (spec.a_f - spec.a_i) * detail::smoothstep_quintic_deriv(z) * 0.5 / spec.width;
        }
        case CoalbedoSpec::Kind::budyko_graph:
            throw std::invalid_argument("coalbedo_derivative: budyko_graph has no derivative");
        case CoalbedoSpec::Kind::budyko_regularized: {
            const double z = 0.5 * ((u - spec.u_bar) * spec.j + 1.0);
            if (z <= 0.0 || z >= 1.0) return 0.0;
            return (spec.a_f - spec.a_i) * 6.0 * z * (1.0 - z) * 0.5 * spec.j;
        }
    }
    return 0.0;
}

/// Outgoing radiation: quartic grey-body eps(u)|u|^3 u, or the affine law a + b u.
struct EmissionSpec {
    enum class Kind { sellers, budyko };
    enum class EpsKind { constant, logistic };

    Kind kind = Kind::sellers;
    EpsKind eps_kind = EpsKind::constant;
    double epsilon1 = 1.0;       // lower bound of eps(u)
    double eps_amplitude = 0.0;  // logistic variant: eps = eps1 + amp*(1 + tanh(u/scale))/2
    double eps_scale = 1.0;
    double a = 0.0;
    double b = 0.0;

    double epsilon(double u) const {
        if (eps_kind == EpsKind::constant) return epsilon1;
        return epsilon1 + eps_amplitude * 0.5 * (1.0 + std::tanh(u / eps_scale));
    }
};

inline double emitted(const EmissionSpec& spec, double u) {
    if (spec.kind == EmissionSpec::Kind::sellers) return spec.epsilon(u) * std::abs(u) * u * u * u;
    return spec.a + spec.b * u;
}

/// Bounded response to the memory integral: f(h) = f_bound * tanh(h / h_scale).
struct MemoryResponseSpec {
    double f_bound = 0.0;
    double h_scale = 1.0;

    double f(double h) const { return f_bound == 0.0 ? 0.0 : f_bound * std::tanh(h / h_scale); }
    double lipschitz() const { return f_bound / h_scale; }
};

/// Everything a run needs: mesh plus all model term specifications.
struct ModelParams {
    Grid grid;
    InsolationSpec insolation;
    CoalbedoSpec coalbedo;
    EmissionSpec emission;
    MemoryResponseSpec memory_response;
    MemoryKernel kernel;
};

/// Componentwise reaction term r(t) q(x) beta(u) - R_e(u) + f(H).
/// The set-valued budyko_graph kind is rejected here; its regularized
/// stand-ins are what the time stepper consumes.
inline std::vector<double> rhs(double t, const std::vector<double>& u, const std::vector<double>& H,
                               const ModelParams& params) {
    if (params.coalbedo.kind == CoalbedoSpec::Kind::budyko_graph)
        throw std::invalid_argument("rhs: budyko_graph coalbedo is set-valued; solve via the regularization scheme");
    const int n = params.grid.n;
    if (static_cast<int>(u.size()) != n || static_cast<int>(H.size()) != n)
        throw std::invalid_argument("rhs: state/history length does not match the grid");
    std::vector<double> g(n);
    const double rt = params.insolation.r(t);
    for (int i = 0; i < n; ++i) {
        const double qx = params.insolation.q(params.grid.centers[i]);
        g[i] = rt * qx * coalbedo(params.coalbedo, u[i]) - emitted(params.emission, u[i]) +
               params.memory_response.f(H[i]);
    }
    return g;
}

/// A-priori sup-norm ceiling for quartic emission:
///   M = max(u0_sup, ((q_bound r_bound beta_bound + f_bound) / eps1)^(1/4))
/// with beta_bound = max(|a_i|, |a_f|).
inline double linf_bound(const ModelParams& params, double u0_sup) {
    if (params.emission.kind != EmissionSpec::Kind::sellers)
        throw std::invalid_argument("linf_bound: only the quartic emission law admits this bound");
    const double beta_bound = std::max(std::abs(params.coalbedo.a_i), std::abs(params.coalbedo.a_f));
    const double m1 = std::pow((params.insolation.q_bound * params.insolation.r_bound * beta_bound +
                                params.memory_response.f_bound) /
                                   params.emission.epsilon1,
                               0.25);
    return std::max(u0_sup, m1);
}

// --- content digest over the parameter set (FNV-1a), for run provenance ---

namespace detail {
inline void fnv_mix(std::uint64_t& h, std::uint64_t v) {
    for (int byte = 0; byte < 8; ++byte) {
        h ^= (v >> (8 * byte)) & 0xffu;
        h *= 1099511628211ull;
    }
}
inline void fnv_mix_double(std::uint64_t& h, double d) { fnv_mix(h, std::bit_cast<std::uint64_t>(d)); }
inline void fnv_mix_vec(std::uint64_t& h, const std::vector<double>& v) {
    fnv_mix(h, v.size());
    for (double d : v) fnv_mix_double(h, d);
}
}  // namespace detail

inline std::uint64_t params_digest(const ModelParams& p) {
    std::uint64_t h = 1469598103934665603ull;
    using detail::fnv_mix;
    using detail::fnv_mix_double;
    using detail::fnv_mix_vec;
    fnv_mix(h, static_cast<std::uint64_t>(p.grid.n));
    fnv_mix_double(h, p.grid.rho0);
    fnv_mix(h, static_cast<std::uint64_t>(p.insolation.q_kind));
    fnv_mix_double(h, p.insolation.q_value);
    fnv_mix_double(h, p.insolation.q_scale);
    fnv_mix_vec(h, p.insolation.q_x);
    fnv_mix_vec(h, p.insolation.q_y);
    fnv_mix(h, static_cast<std::uint64_t>(p.insolation.r_kind));
    fnv_mix_double(h, p.insolation.r_value);
    fnv_mix_double(h, p.insolation.r_amplitude);
    fnv_mix_double(h, p.insolation.r_period);
    fnv_mix(h, static_cast<std::uint64_t>(p.coalbedo.kind));
    fnv_mix_double(h, p.coalbedo.a_i);
    fnv_mix_double(h, p.coalbedo.a_f);
    fnv_mix_double(h, p.coalbedo.u_bar);
    fnv_mix_double(h, p.coalbedo.width);
    fnv_mix(h, static_cast<std::uint64_t>(p.coalbedo.j));
    fnv_mix(h, static_cast<std::uint64_t>(p.emission.kind));
    fnv_mix(h, static_cast<std::uint64_t>(p.emission.eps_kind));
    fnv_mix_double(h, p.emission.epsilon1);
    fnv_mix_double(h, p.emission.eps_amplitude);
    fnv_mix_double(h, p.emission.eps_scale);
    fnv_mix_double(h, p.emission.a);
    fnv_mix_double(h, p.emission.b);
    fnv_mix_double(h, p.memory_response.f_bound);
    fnv_mix_double(h, p.memory_response.h_scale);
    fnv_mix(h, static_cast<std::uint64_t>(p.kernel.kind));
    fnv_mix_double(h, p.kernel.tau);
    fnv_mix_double(h, p.kernel.delta);
    fnv_mix(h, p.kernel.support_flag ? 1u : 0u);
    fnv_mix_double(h, p.kernel.amplitude);
    fnv_mix_vec(h, p.kernel.table_s);
    fnv_mix_vec(h, p.kernel.table_x);
    fnv_mix_vec(h, p.kernel.table_k);
    return h;
}

}  // namespace ebmm
