#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ebmm/errors.hpp"
#include "ebmm/grid.hpp"

namespace ebmm {

/// Weight of past temperatures in the delay integral.
///
/// The kernel lives on s in [-tau, 0]. When support_flag is set the kernel
/// is identically zero on the recent-past interval [-delta, 0]; value()
/// returns an exact 0.0 there, which is what makes the memory-freezing
/// invariant exact rather than approximate.
struct MemoryKernel {
    enum class Kind { constant_on_support, hat, cosine_taper, table };

    Kind kind = Kind::constant_on_support;
    double tau = 1.0;
    double delta = 0.0;
    bool support_flag = false;
    double amplitude = 1.0;

    // tabulated kernel (kind == table): rectangular (s, x) lattice, row-major in s;
    // table_dk holds dk/ds on the same lattice (built at load time, left-sided
    // at the dead-zone edge so the support kink is not smeared)
    std::vector<double> table_s;
    std::vector<double> table_x;
    std::vector<double> table_k;
    std::vector<double> table_dk;

    /// k(s, x). Exact zero on the dead zone when support_flag is set.
    double value(double s, double x) const {
        if (support_flag && s >= -delta) return 0.0;
        switch (kind) {
            case Kind::constant_on_support:
                return (s >= -tau && s < -delta) ? amplitude : (s < -tau ? 0.0 : (support_flag ? 0.0 : amplitude));
            case Kind::hat: {
                const double lo = -tau, hi = -delta;
                if (s < lo || s > hi) return 0.0;
                const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
                return amplitude * std::max(0.0, 1.0 - std::abs(s - mid) / half);
            }
            case Kind::cosine_taper: {
                const double lo = -tau, hi = -delta;
                if (s < lo || s > hi) return 0.0;
                const double theta = (s - lo) / (hi - lo);
                return 0.5 * amplitude * (1.0 - std::cos(2.0 * M_PI * theta));
            }
            case Kind::table:
                return interpolate(s, x);
        }
        return 0.0;
    }

    /// dk/ds at (s, x); the left limit from inside the support at s = -delta.
    double s_derivative(double s, double x) const {
        switch (kind) {
            case Kind::constant_on_support:
                return 0.0;  // the jump at -delta is carried by the boundary terms, not by k_s
            case Kind::hat: {
                const double lo = -tau, hi = -delta;
                if (s < lo || s > hi) return 0.0;
                const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
                return (s < mid ? amplitude : -amplitude) / half;
            }
            case Kind::cosine_taper: {
                const double lo = -tau, hi = -delta;
                if (s < lo || s > hi) return 0.0;
                const double theta = (s - lo) / (hi - lo);
                return 0.5 * amplitude * (2.0 * M_PI / (hi - lo)) * std::sin(2.0 * M_PI * theta);
            }
            case Kind::table:
                return interpolate_lattice(table_dk, s, x);
        }
        return 0.0;
    }

    /// k(-tau, x).
    double edge_value_tau(double x) const { return value(-tau, x); }

    /// Left limit of k at the dead-zone boundary -delta.
    /// Only the constant kernel jumps there; the tapered shapes vanish.
    double edge_value_delta(double x) const {
        switch (kind) {
            case Kind::constant_on_support:
                return amplitude;
            case Kind::hat:
            case Kind::cosine_taper:
                return 0.0;
            case Kind::table: {
                // tables are continuous interpolants; the left limit is the lattice value at -delta
                return interpolate(std::max(-tau, -delta), x);
            }
        }
        return 0.0;
    }

    /// Build the dk/ds lattice: centered differences inside the support,
    /// one-sided at the lattice ends and at the dead-zone edge, zero beyond it.
    void build_derivative_table() {
        const size_t ns = table_s.size(), nx = table_x.size();
        table_dk.assign(ns * nx, 0.0);
        auto in_dead_zone = [&](size_t is) { return support_flag && table_s[is] >= -delta; };
        for (size_t is = 0; is < ns; ++is) {
            if (in_dead_zone(is) && table_s[is] > -delta) continue;  // strictly inside the dead zone
            size_t lo = is, hi = is;
            if (is > 0) lo = is - 1;
            if (is + 1 < ns && !in_dead_zone(is + 1)) hi = is + 1;
            if (in_dead_zone(is)) hi = is;  // boundary node: left-sided
            if (lo == hi) continue;
            for (size_t ix = 0; ix < nx; ++ix)
                table_dk[is * nx + ix] = (table_k[hi * nx + ix] - table_k[lo * nx + ix]) / (table_s[hi] - table_s[lo]);
        }
    }

  private:
    double interpolate(double s, double x) const { return interpolate_lattice(table_k, s, x); }

    double interpolate_lattice(const std::vector<double>& lattice, double s, double x) const {
        const auto [is, ws] = bracket(table_s, s);
        const auto [ix, wx] = bracket(table_x, x);
        const size_t nx = table_x.size();
        const size_t is1 = std::min(is + 1, table_s.size() - 1);
        const size_t ix1 = std::min(ix + 1, nx - 1);
        const double k00 = lattice[is * nx + ix], k01 = lattice[is * nx + ix1];
        const double k10 = lattice[is1 * nx + ix], k11 = lattice[is1 * nx + ix1];
        return (1 - ws) * ((1 - wx) * k00 + wx * k01) + ws * ((1 - wx) * k10 + wx * k11);
    }

    /// Left-biased bracketing: an exact node v = s_j resolves to [s_{j-1}, s_j],
    /// so lattice values at the dead-zone edge read as left limits.
    static std::pair<size_t, double> bracket(const std::vector<double>& nodes, double v) {
        if (v <= nodes.front()) return {0, 0.0};
        if (v >= nodes.back()) return {nodes.size() - 2, 1.0};
        const size_t at = std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin();
        const size_t lo = at - 1;
        return {lo, (v - nodes[lo]) / (nodes[lo + 1] - nodes[lo])};
    }
};

inline MemoryKernel kernel_constant(double tau, double delta, double amplitude, bool support_flag = true) {
    if (!(tau > 0.0) || delta < 0.0 || delta >= tau)
        throw std::invalid_argument("kernel_constant: need tau > 0 and 0 <= delta < tau");
    MemoryKernel k;
    k.kind = MemoryKernel::Kind::constant_on_support;
    k.tau = tau;
    k.delta = delta;
    k.amplitude = amplitude;
    k.support_flag = support_flag;
    return k;
}

inline MemoryKernel kernel_hat(double tau, double delta, double amplitude, bool support_flag = true) {
    MemoryKernel k = kernel_constant(tau, delta, amplitude, support_flag);
    k.kind = MemoryKernel::Kind::hat;
    return k;
}

inline MemoryKernel kernel_cosine(double tau, double delta, double amplitude, bool support_flag = true) {
    MemoryKernel k = kernel_constant(tau, delta, amplitude, support_flag);
    k.kind = MemoryKernel::Kind::cosine_taper;
    return k;
}

/// Load a tabulated kernel from CSV with header "s,x,k" over a complete
/// rectangular lattice. The lattice must cover [-tau,0] x [-1,1]; when
/// support_flag is set every entry with s >= -delta must be exactly zero.
inline MemoryKernel kernel_from_csv(const std::string& path, double tau, double delta, bool support_flag) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("kernel_from_csv: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::map<double, std::map<double, double>> lattice;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        double vals[3];
        for (int c = 0; c < 3; ++c) {
            if (!std::getline(ss, field, ',') || sscanf(field.c_str(), "%lf", &vals[c]) != 1)
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed kernel row");
        }
        lattice[vals[0]][vals[1]] = vals[2];
    }
    if (lattice.size() < 2) throw std::invalid_argument("kernel_from_csv: need at least two s nodes");
    MemoryKernel k;
    k.kind = MemoryKernel::Kind::table;
    k.tau = tau;
    k.delta = delta;
    k.support_flag = support_flag;
    const auto& first_row = lattice.begin()->second;
    for (const auto& [x, _] : first_row) k.table_x.push_back(x);
    for (const auto& [s, row] : lattice) {
        k.table_s.push_back(s);
        if (row.size() != k.table_x.size())
            throw std::invalid_argument("kernel_from_csv: incomplete lattice at s=" + std::to_string(s));
        size_t ix = 0;
        for (const auto& [x, v] : row) {
            if (x != k.table_x[ix++])
                throw std::invalid_argument("kernel_from_csv: inconsistent x nodes at s=" + std::to_string(s));
            k.table_k.push_back(v);
        }
    }
    const double tol = 1e-9 * std::max(1.0, tau);
    if (std::abs(k.table_s.front() + tau) > tol || std::abs(k.table_s.back()) > tol)
        throw std::invalid_argument("kernel_from_csv: s nodes must span [-tau, 0]");
    if (std::abs(k.table_x.front() + 1.0) > tol || std::abs(k.table_x.back() - 1.0) > tol)
        throw std::invalid_argument("kernel_from_csv: x nodes must span [-1, 1]");
    if (support_flag) {
        for (size_t is = 0; is < k.table_s.size(); ++is)
            if (k.table_s[is] >= -delta)
                for (size_t ix = 0; ix < k.table_x.size(); ++ix)
                    if (k.table_k[is * k.table_x.size() + ix] != 0.0)
                        throw std::invalid_argument("kernel_from_csv: nonzero entry inside the dead zone at s=" +
                                                    std::to_string(k.table_s[is]));
    }
    k.build_derivative_table();
    return k;
}

/// Ring buffer of the past m+1 states at spacing dt, spanning [head_time - tau, head_time].
struct HistoryBuffer {
    double dt = 0.0;
    int m = 0;  // m * dt == tau
    double head_time = 0.0;
    std::vector<std::vector<double>> storage;  // m+1 physical slots
    int oldest = 0;                            // physical index of the oldest slot

    bool initialized() const { return !storage.empty(); }

    /// Slot j = 0 (oldest, head_time - tau) .. m (newest, head_time).
    const std::vector<double>& slot(int j) const {
        return storage[(oldest + j) % (m + 1)];
    }
    std::vector<double>& slot(int j) { return storage[(oldest + j) % (m + 1)]; }

    double slot_time(int j) const { return head_time + (j - m) * dt; }
};

template <typename F>
HistoryBuffer init_history(F&& u0, const Grid& grid, double dt, double tau) {
    if (!(dt > 0.0) || !(tau > 0.0)) throw std::invalid_argument("init_history: need dt > 0 and tau > 0");
    const double ratio = tau / dt;
    const long long m = std::llround(ratio);
    if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("init_history: tau/dt must be an integer, got " + std::to_string(ratio));
    HistoryBuffer buf;
    buf.dt = dt;
    buf.m = static_cast<int>(m);
    buf.head_time = 0.0;
    buf.oldest = 0;
    buf.storage.assign(buf.m + 1, std::vector<double>(grid.n));
    for (int j = 0; j <= buf.m; ++j) {
        const double s = (j - buf.m) * dt;
        for (int i = 0; i < grid.n; ++i) buf.storage[j][i] = u0(s, grid.centers[i]);
    }
    return buf;
}

inline void push_state(HistoryBuffer& buf, const std::vector<double>& u, double t) {
    if (!buf.initialized()) throw invalid_state_error("push_state: buffer not initialized");
    const double expected = buf.head_time + buf.dt;
    if (std::abs(t - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
        throw std::invalid_argument("push_state: non-contiguous time " + std::to_string(t) +
                                    ", expected " + std::to_string(expected));
    buf.storage[buf.oldest] = u;  // overwrite the evicted oldest slot; it becomes the newest
    buf.oldest = (buf.oldest + 1) % (buf.m + 1);
    buf.head_time = t;
}

/// Trapezoid weights w_j * k(s_j, x_i) for the delay quadrature, with the
/// dead zone dropped outright when support_flag holds (those factors are
/// exact zeros, so the restricted sum is bitwise equal to the full one).
struct HistoryWeights {
    int jmax = 0;  // inclusive upper slot index entering the quadrature
    std::vector<std::vector<double>> w;  // (jmax+1) x n
};

inline HistoryWeights make_history_weights(const MemoryKernel& kernel, const Grid& grid, double dt, int m) {
    HistoryWeights hw;
    int jmax = m;
    if (kernel.support_flag) {
        const double dr = kernel.delta / dt;
        const long long d = std::llround(dr);
        if (std::abs(dr - static_cast<double>(d)) > 1e-9 * std::max(1.0, dr))
            throw std::invalid_argument("make_history_weights: delta/dt must be an integer for a dead-zone kernel");
        jmax = m - static_cast<int>(d) - 1;  // node at -delta carries k = 0 exactly
    }
    hw.jmax = jmax;
    hw.w.assign(std::max(0, jmax + 1), std::vector<double>(grid.n));
    for (int j = 0; j <= jmax; ++j) {
        const double s = (j - m) * dt;
        const double wj = (j == 0 || j == m) ? 0.5 * dt : dt;
        for (int i = 0; i < grid.n; ++i) hw.w[j][i] = wj * kernel.value(s, grid.centers[i]);
    }
    return hw;
}

inline std::vector<double> eval_history(const HistoryBuffer& buf, const HistoryWeights& hw, int n) {
    std::vector<double> H(n, 0.0);
    for (int j = 0; j <= hw.jmax; ++j) {
        const std::vector<double>& u = buf.slot(j);
        const std::vector<double>& w = hw.w[j];
        for (int i = 0; i < n; ++i) H[i] += w[i] * u[i];
    }
    return H;
}

/// H[i] = trapezoid over the buffer of k(s, x_i) * u(head_time + s, x_i).
inline std::vector<double> eval_history(const HistoryBuffer& buf, const MemoryKernel& kernel, const Grid& grid) {
    if (!buf.initialized()) throw invalid_state_error("eval_history: buffer not initialized");
    return eval_history(buf, make_history_weights(kernel, grid, buf.dt, buf.m), grid.n);
}

/// Time derivative of the frozen memory integral, valid while the buffer
/// head is still inside the dead zone (head_time < delta), where H depends
/// on the initial history only:
///   H_t = k(-delta-, x) u(t - delta, x) - k(-tau, x) u(t - tau, x)
///         - integral over the support of k_s(s, x) u(t + s, x) ds.
inline std::vector<double> history_time_derivative(const HistoryBuffer& buf, const MemoryKernel& kernel,
                                                   const Grid& grid) {
    if (!kernel.support_flag)
        throw invalid_state_error("history_time_derivative: requires a dead-zone kernel (support_flag)");
    if (!(buf.head_time < kernel.delta))
        throw invalid_state_error("history_time_derivative: head_time " + std::to_string(buf.head_time) +
                                  " is outside the frozen-memory window [0, " + std::to_string(kernel.delta) + ")");
    const int m = buf.m;
    const double dr = kernel.delta / buf.dt;
    const long long d = std::llround(dr);
    if (std::abs(dr - static_cast<double>(d)) > 1e-9 * std::max(1.0, dr))
        throw std::invalid_argument("history_time_derivative: delta/dt must be an integer");
    const int jdelta = m - static_cast<int>(d);
    std::vector<double> ht(grid.n);
    for (int i = 0; i < grid.n; ++i) {
        const double x = grid.centers[i];
        ht[i] = kernel.edge_value_delta(x) * buf.slot(jdelta)[i] - kernel.value(-kernel.tau, x) * buf.slot(0)[i];
    }
    for (int j = 0; j <= jdelta; ++j) {
        const double s = (j - m) * buf.dt;
        const double wj = (j == 0 || j == jdelta) ? 0.5 * buf.dt : buf.dt;
        const std::vector<double>& u = buf.slot(j);
        for (int i = 0; i < grid.n; ++i) ht[i] -= wj * kernel.s_derivative(s, grid.centers[i]) * u[i];
    }
    return ht;
}

}  // namespace ebmm
