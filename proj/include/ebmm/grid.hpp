#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebmm {

/// Uniform cell-centered mesh on (-1,1) with the degenerate diffusion
/// coefficient rho(x) = rho0*(1-x^2) sampled at cell faces.
///
/// faces[0] = -1 and faces[n] = +1 hold exactly, so rho_at_faces vanishes
/// exactly at both ends: the zero-flux boundary condition costs nothing.
struct Grid {
    int n = 0;
    double dx = 0.0;
    double rho0 = 0.0;
    std::vector<double> centers;       // n cell midpoints
    std::vector<double> faces;         // n+1 face coordinates
    std::vector<double> rho_at_faces;  // rho0*(1 - faces^2)
};

/// Tridiagonal flux-form discretization of u -> (rho u_x)_x.
///
/// sub[i] == sup[i] (stored from the same face coefficient) and
/// diag[i] = -(c_i + c_{i+1}) where c are the divided face couplings,
/// so symmetry is exact and row sums vanish to rounding.
struct DiffusionOperator {
    int n = 0;
    double dx = 0.0;
    std::vector<double> sub;   // length n-1
    std::vector<double> diag;  // length n
    std::vector<double> sup;   // length n-1
};

inline Grid build_grid(int n, double rho0) {
    if (n < 3) throw std::invalid_argument("build_grid: n must be >= 3, got " + std::to_string(n));
    if (!(rho0 > 0.0)) throw std::invalid_argument("build_grid: rho0 must be > 0");
    Grid g;
    g.n = n;
    g.rho0 = rho0;
    g.dx = 2.0 / n;
    g.faces.resize(n + 1);
    g.centers.resize(n);
    g.rho_at_faces.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        g.faces[i] = -1.0 + (2.0 * i) / n;  // endpoints land on -1 and +1 exactly
        g.rho_at_faces[i] = rho0 * (1.0 - g.faces[i] * g.faces[i]);
    }
    for (int i = 0; i < n; ++i) g.centers[i] = 0.5 * (g.faces[i] + g.faces[i + 1]);
    return g;
}

inline DiffusionOperator assemble_diffusion(const Grid& grid) {
    const int n = grid.n;
    DiffusionOperator op;
    op.n = n;
    op.dx = grid.dx;
    op.sub.resize(n - 1);
    op.diag.resize(n);
    op.sup.resize(n - 1);
    const double inv_dx2 = 1.0 / (grid.dx * grid.dx);
    std::vector<double> c(n + 1);  // divided face couplings; c[0] = c[n] = 0 exactly
    for (int i = 0; i <= n; ++i) c[i] = grid.rho_at_faces[i] * inv_dx2;
    for (int i = 0; i < n - 1; ++i) {
        op.sub[i] = c[i + 1];
        op.sup[i] = c[i + 1];
    }
    for (int i = 0; i < n; ++i) op.diag[i] = -(c[i] + c[i + 1]);
    return op;
}

inline std::vector<double> apply_diffusion(const DiffusionOperator& op, const std::vector<double>& u) {
    const int n = op.n;
    if (static_cast<int>(u.size()) != n)
        throw std::invalid_argument("apply_diffusion: state length " + std::to_string(u.size()) +
                                    " does not match operator size " + std::to_string(n));
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        double v = op.diag[i] * u[i];
        if (i > 0) v += op.sub[i - 1] * u[i - 1];
        if (i < n - 1) v += op.sup[i] * u[i + 1];
        y[i] = v;
    }
    return y;
}

/// Solve (Id - dt*Op) v = rhs by the Thomas algorithm.
/// The system is a strictly diagonally dominant M-matrix (Op has zero row
/// sums and nonpositive diagonal), so no pivoting is needed and the solve
/// obeys a discrete maximum principle.
inline std::vector<double> solve_implicit(const DiffusionOperator& op, const std::vector<double>& rhs, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("solve_implicit: dt must be > 0");
    const int n = op.n;
    if (static_cast<int>(rhs.size()) != n)
        throw std::invalid_argument("solve_implicit: rhs length does not match operator size");
    std::vector<double> c_prime(n, 0.0), d_prime(n), v(n);
    double denom = 1.0 - dt * op.diag[0];
    c_prime[0] = (n > 1) ? (-dt * op.sup[0]) / denom : 0.0;
    d_prime[0] = rhs[0] / denom;
    for (int i = 1; i < n; ++i) {
        const double a = -dt * op.sub[i - 1];
        const double b = 1.0 - dt * op.diag[i];
        denom = b - a * c_prime[i - 1];
        if (i < n - 1) c_prime[i] = (-dt * op.sup[i]) / denom;
        d_prime[i] = (rhs[i] - a * d_prime[i - 1]) / denom;
    }
    v[n - 1] = d_prime[n - 1];
    for (int i = n - 2; i >= 0; --i) v[i] = d_prime[i] - c_prime[i] * v[i + 1];
    return v;
}

/// Infinity norm of the operator (max absolute row sum).
inline double operator_inf_norm(const DiffusionOperator& op) {
    double m = 0.0;
    for (int i = 0; i < op.n; ++i) {
        double s = std::abs(op.diag[i]);
        if (i > 0) s += std::abs(op.sub[i - 1]);
        if (i < op.n - 1) s += std::abs(op.sup[i]);
        m = std::max(m, s);
    }
    return m;
}

// --- discrete norms over the mesh ---

inline double linf_norm(const std::vector<double>& u) {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    return m;
}

/// dx-weighted discrete L2 norm.
inline double l2_norm(const std::vector<double>& u, double dx) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return std::sqrt(s * dx);
}

/// Graph norm ||u|| = ||u||_2 + ||sqrt(rho) D_x u||_2 with face differences.
inline double v_norm(const std::vector<double>& u, const Grid& grid) {
    double s = 0.0;
    for (int i = 1; i < grid.n; ++i) {
        const double d = (u[i] - u[i - 1]) / grid.dx;
        s += grid.rho_at_faces[i] * d * d;
    }
    return l2_norm(u, grid.dx) + std::sqrt(s * grid.dx);
}

/// ||u||_2 + ||Op u||_2: the discrete stand-in for the operator-domain norm.
inline double da_norm(const std::vector<double>& u, const DiffusionOperator& op) {
    return l2_norm(u, op.dx) + l2_norm(apply_diffusion(op, u), op.dx);
}

}  // namespace ebmm
