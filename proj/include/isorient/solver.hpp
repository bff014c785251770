#pragma once

#include "isorient/assembly.hpp"

#include <functional>
#include <optional>

namespace isorient {

/// Concatenated unknown (x; n): indicator coefficients over free nodes and
/// three normal components per sample.
struct SolutionState {
    std::vector<double> x;
    std::vector<double> n;

    static SolutionState zeros(const SystemOperators& ops) {
        return {std::vector<double>(static_cast<std::size_t>(ops.node_dim()), 0.0),
                std::vector<double>(static_cast<std::size_t>(ops.normal_dim()), 0.0)};
    }

    std::vector<double> flatten() const {
        std::vector<double> v(x);
        v.insert(v.end(), n.begin(), n.end());
        return v;
    }

    static SolutionState unflatten(const SystemOperators& ops, const std::vector<double>& v) {
        const auto nx = static_cast<std::size_t>(ops.node_dim());
        if (v.size() != nx + static_cast<std::size_t>(ops.normal_dim()))
            throw NumericalError("state dimension mismatch");
        return {std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nx)),
                std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(nx), v.end())};
    }

    Vec3 normal(std::size_t i) const { return {n[3 * i], n[3 * i + 1], n[3 * i + 2]}; }
};

struct Energies {
    double iso = 0.0;      // |Ux - 1/2|^2
    double poisson = 0.0;  // |Ax - Bn|^2
    double local = 0.0;    // n^T M n
    double reg = 0.0;      // |n|^2
    double total = 0.0;    // iso + alpha poisson + beta local + gamma reg
};

struct SolverReport {
    std::size_t iterations = 0;
    std::vector<double> residuals;            // |b - A x| per iterate, iterations + 1 entries
    std::vector<Energies> energy_trace;       // filled only when requested
    Energies final_energies;
};

namespace detail {

inline void check_dims(const SystemOperators& ops, const SolutionState& s) {
    if (!ops.reduced) throw NumericalError("operators must be boundary-reduced");
    if (static_cast<Index>(s.x.size()) != ops.node_dim() || static_cast<Index>(s.n.size()) != ops.normal_dim())
        throw NumericalError("state dimension mismatch");
}

inline void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(y.size()); ++i)
        y[static_cast<std::size_t>(i)] += a * x[static_cast<std::size_t>(i)];
}

}  // namespace detail

/// Matrix-free product with the block normal-equation operator
///   [ U^T U + a A^T A     -a A^T B          ] [x]
///   [ -a B^T A            a B^T B + b M + g I ] [n]
/// using only sparse matrix-vector products.
inline SolutionState apply_system(const SystemOperators& ops, const SolutionState& s) {
    detail::check_dims(ops, s);
    const std::size_t nx = s.x.size(), nn = s.n.size();
    std::vector<double> ux = ops.U * s.x;
    std::vector<double> r = ops.A * s.x;  // becomes Ax - Bn
    std::vector<double> bn = ops.B * s.n;
    for (std::size_t i = 0; i < nx; ++i) r[i] -= bn[i];

    SolutionState out;
    out.x = ops.Ut * ux;
    std::vector<double> ar = ops.A * r;  // A symmetric
    for (std::size_t i = 0; i < nx; ++i) out.x[i] += ops.alpha * ar[i];

    std::vector<double> btr = ops.Bt * r;
    std::vector<double> mn = ops.M * s.n;
    out.n.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) out.n[i] = -ops.alpha * btr[i] + ops.beta * mn[i] + ops.gamma * s.n[i];
    return out;
}

/// Right-hand side (U^T 1/2; 0).
inline SolutionState rhs(const SystemOperators& ops) {
    SolutionState b = SolutionState::zeros(ops);
    std::vector<double> half(static_cast<std::size_t>(ops.num_points()), 0.5);
    b.x = ops.Ut * half;
    return b;
}

inline Energies total_energy(const SystemOperators& ops, const SolutionState& s) {
    detail::check_dims(ops, s);
    Energies e;
    auto ux = ops.U * s.x;
    for (double v : ux) e.iso += (v - 0.5) * (v - 0.5);
    auto ax = ops.A * s.x;
    auto bn = ops.B * s.n;
    for (std::size_t i = 0; i < ax.size(); ++i) ax[i] -= bn[i];
    e.poisson = norm2(ax);
    auto mn = ops.M * s.n;
    e.local = dot(s.n, mn);
    e.reg = norm2(s.n);
    e.total = e.iso + ops.alpha * e.poisson + ops.beta * e.local + ops.gamma * e.reg;
    return e;
}

struct CgOptions {
    std::size_t max_iters = 300;
    double tol = 0.0;  // relative residual; 0 runs all iterations
    bool jacobi = false;
    bool record_energies = false;
};

using LinearOperator = std::function<std::vector<double>(const std::vector<double>&)>;

struct CgResult {
    std::vector<double> solution;
    std::size_t iterations = 0;
    std::vector<double> residuals;
};

/// Conjugate gradients from x0 = 0. `precond` (optional) applies the inverse of
/// a diagonal preconditioner. `on_iter` observes each new iterate.
inline CgResult conjugate_gradient(const LinearOperator& apply, const std::vector<double>& b, std::size_t max_iters,
                                   double tol, const std::vector<double>* inv_diag = nullptr,
                                   const std::function<void(const std::vector<double>&)>& on_iter = {}) {
    const std::size_t dim = b.size();
    CgResult res;
    res.solution.assign(dim, 0.0);
    std::vector<double> r = b;
    auto precondition = [&](const std::vector<double>& v) {
        if (!inv_diag) return v;
        std::vector<double> z(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) z[i] = (*inv_diag)[i] * v[i];
        return z;
    };
    std::vector<double> z = precondition(r);
    std::vector<double> p = z;
    double rz = dot(r, z);
    const double bnorm = std::sqrt(norm2(b));
    double rnorm = bnorm;
    res.residuals.push_back(rnorm);
    if (on_iter) on_iter(res.solution);
    for (std::size_t it = 0; it < max_iters; ++it) {
        if (rnorm == 0.0 || (tol > 0.0 && rnorm <= tol * bnorm)) break;
        std::vector<double> ap = apply(p);
        const double pap = dot(p, ap);
        const double pp = norm2(p);
        if (!std::isfinite(pap))
            throw NumericalError("cg: non-finite curvature at iteration " + std::to_string(it + 1));
        if (pap <= -1e-12 * pp || pap == 0.0)
            throw NumericalError("cg: non-positive curvature at iteration " + std::to_string(it + 1));
        const double step = rz / pap;
        detail::axpy(step, p, res.solution);
        detail::axpy(-step, ap, r);
        z = precondition(r);
        const double rz_next = dot(r, z);
        rnorm = std::sqrt(norm2(r));
        if (!std::isfinite(rnorm) || !std::isfinite(step))
            throw NumericalError("cg: non-finite iterate at iteration " + std::to_string(it + 1));
        const double beta = rz_next / rz;
        rz = rz_next;
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(dim); ++i)
            p[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
        res.iterations = it + 1;
        res.residuals.push_back(rnorm);
        if (on_iter) on_iter(res.solution);
    }
    return res;
}

/// Diagonal of the block operator, from squared column norms of U, A, B.
inline std::vector<double> system_diagonal(const SystemOperators& ops) {
    const auto nx = static_cast<std::size_t>(ops.node_dim());
    const auto nn = static_cast<std::size_t>(ops.normal_dim());
    std::vector<double> d(nx + nn, 0.0);
    for (Index r = 0; r < ops.U.rows(); ++r) {
        auto c = ops.U.row_cols(r);
        auto v = ops.U.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) d[static_cast<std::size_t>(c[k])] += v[k] * v[k];
    }
    for (Index r = 0; r < ops.A.rows(); ++r) {
        auto c = ops.A.row_cols(r);
        auto v = ops.A.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) d[static_cast<std::size_t>(c[k])] += ops.alpha * v[k] * v[k];
    }
    for (Index r = 0; r < ops.B.rows(); ++r) {
        auto c = ops.B.row_cols(r);
        auto v = ops.B.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) d[nx + static_cast<std::size_t>(c[k])] += ops.alpha * v[k] * v[k];
    }
    for (std::size_t i = 0; i < nn; ++i)
        d[nx + i] += ops.beta * ops.M.coeff(static_cast<Index>(i), static_cast<Index>(i)) + ops.gamma;
    return d;
}

/// Solves the reduced system with CG starting from zero.
inline std::pair<SolutionState, SolverReport> solve_cg(const SystemOperators& ops, const CgOptions& opt = {}) {
    if (!(ops.gamma > 0.0)) throw InputError("solve: gamma must be positive");
    const std::vector<double> b = rhs(ops).flatten();
    LinearOperator apply = [&](const std::vector<double>& v) {
        return apply_system(ops, SolutionState::unflatten(ops, v)).flatten();
    };
    std::optional<std::vector<double>> inv_diag;
    if (opt.jacobi) {
        inv_diag = system_diagonal(ops);
        for (auto& v : *inv_diag) v = v > 0.0 ? 1.0 / v : 1.0;
    }
    SolverReport report;
    std::function<void(const std::vector<double>&)> observer;
    if (opt.record_energies)
        observer = [&](const std::vector<double>& v) {
            report.energy_trace.push_back(total_energy(ops, SolutionState::unflatten(ops, v)));
        };
    auto cg = conjugate_gradient(apply, b, opt.max_iters, opt.tol, inv_diag ? &*inv_diag : nullptr, observer);
    SolutionState state = SolutionState::unflatten(ops, cg.solution);
    report.iterations = cg.iterations;
    report.residuals = std::move(cg.residuals);
    report.final_energies = total_energy(ops, state);
    return {std::move(state), std::move(report)};
}

/// Coefficients over all nodes, with zeros at the eliminated boundary nodes.
inline std::vector<double> expand_coefficients(const FreeMap& fm, const std::vector<double>& x_free) {
    std::vector<double> full(fm.node_to_free.size(), 0.0);
    for (std::size_t k = 0; k < fm.free_to_node.size(); ++k)
        full[static_cast<std::size_t>(fm.free_to_node[k])] = x_free[k];
    return full;
}

}  // namespace isorient
