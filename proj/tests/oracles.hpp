#pragma once

#include "isorient/assembly.hpp"
#include "isorient/cloud.hpp"
#include "isorient/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <set>

namespace oracle {

using namespace isorient;

// 5-point Gauss-Legendre rule on [-1, 1], exact for polynomials of degree 9.
inline constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                    0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                      0.4786286704993665, 0.2369268850561891};

// Knots of a quadratic basis: center + {-1.5, -0.5, 0.5, 1.5} * width.
inline std::vector<double> knots(const Basis1D& b) {
    const double c = b.center(), w = b.width();
    return {c - 1.5 * w, c - 0.5 * w, c + 0.5 * w, c + 1.5 * w};
}

inline std::vector<double> merged_breaks(const std::vector<double>& a, const std::vector<double>& b, double lo,
                                         double hi) {
    std::vector<double> all;
    for (double v : a)
        if (v > lo && v < hi) all.push_back(v);
    for (double v : b)
        if (v > lo && v < hi) all.push_back(v);
    all.push_back(lo);
    all.push_back(hi);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

template <class F>
double gauss_1d(const std::vector<double>& breaks, F&& f) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k], b = breaks[k + 1], h = 0.5 * (b - a), m = 0.5 * (a + b);
        for (std::size_t g = 0; g < 5; ++g) s += h * kGaussWeights[g] * f(m + h * kGaussNodes[g]);
    }
    return s;
}

// Integral over R of the selected product, plus the integral of its magnitude.
inline std::pair<double, double> inner_1d_quadrature(const Basis1D& a, const Basis1D& b, InnerMode mode) {
    const double lo = std::max(a.support_lo(), b.support_lo()), hi = std::min(a.support_hi(), b.support_hi());
    if (!(lo < hi)) return {0.0, 0.0};
    const auto breaks = merged_breaks(knots(a), knots(b), lo, hi);
    auto f = [&](double t) {
        switch (mode) {
            case InnerMode::ValVal: return eval_1d(a, t) * eval_1d(b, t);
            case InnerMode::DerDer: return deriv_1d(a, t) * deriv_1d(b, t);
            case InnerMode::DerVal: return deriv_1d(a, t) * eval_1d(b, t);
        }
        return 0.0;
    };
    return {gauss_1d(breaks, f), gauss_1d(breaks, [&](double t) { return std::abs(f(t)); })};
}

// Tensor Gauss rule over the box [lo, hi] split at the given per-axis breaks.
template <class F>
double gauss_3d(const std::array<std::vector<double>, 3>& breaks, F&& f) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks[0].size(); ++i)
        for (std::size_t j = 0; j + 1 < breaks[1].size(); ++j)
            for (std::size_t k = 0; k + 1 < breaks[2].size(); ++k) {
                const double hx = 0.5 * (breaks[0][i + 1] - breaks[0][i]), mx = 0.5 * (breaks[0][i + 1] + breaks[0][i]);
                const double hy = 0.5 * (breaks[1][j + 1] - breaks[1][j]), my = 0.5 * (breaks[1][j + 1] + breaks[1][j]);
                const double hz = 0.5 * (breaks[2][k + 1] - breaks[2][k]), mz = 0.5 * (breaks[2][k + 1] + breaks[2][k]);
                for (std::size_t a = 0; a < 5; ++a)
                    for (std::size_t b = 0; b < 5; ++b)
                        for (std::size_t c = 0; c < 5; ++c)
                            s += hx * hy * hz * kGaussWeights[a] * kGaussWeights[b] * kGaussWeights[c] *
                                 f(Vec3(mx + hx * kGaussNodes[a], my + hy * kGaussNodes[b], mz + hz * kGaussNodes[c]));
            }
    return s;
}

// <grad B_i, grad B_j> by 3D quadrature of grad_3d products.
inline double stiffness_quadrature(const NodeCoord& i, const NodeCoord& j) {
    std::array<std::vector<double>, 3> br;
    for (int a = 0; a < 3; ++a) {
        const Basis1D bi = i.axis(a), bj = j.axis(a);
        const double lo = std::max(bi.support_lo(), bj.support_lo()), hi = std::min(bi.support_hi(), bj.support_hi());
        if (!(lo < hi)) return 0.0;
        br[static_cast<std::size_t>(a)] = merged_breaks(knots(bi), knots(bj), lo, hi);
    }
    return gauss_3d(br, [&](const Vec3& q) { return grad_3d(i, q).dot(grad_3d(j, q)); });
}

// <d_axis B_i, B_o> by 3D quadrature.
inline double divergence_quadrature(const NodeCoord& i, const NodeCoord& o, int axis) {
    std::array<std::vector<double>, 3> br;
    for (int a = 0; a < 3; ++a) {
        const Basis1D bi = i.axis(a), bo = o.axis(a);
        const double lo = std::max(bi.support_lo(), bo.support_lo()), hi = std::min(bi.support_hi(), bo.support_hi());
        if (!(lo < hi)) return 0.0;
        br[static_cast<std::size_t>(a)] = merged_breaks(knots(bi), knots(bo), lo, hi);
    }
    return gauss_3d(br, [&](const Vec3& q) { return grad_3d(i, q)[axis] * eval_3d(o, q); });
}

inline Eigen::MatrixXd dense(const SparseMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
        auto c = m.row_cols(r);
        auto v = m.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) d(r, c[k]) += v[k];
    }
    return d;
}

// The block normal-equation matrix and right-hand side, formed densely.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> dense_system(const SystemOperators& ops) {
    const Eigen::MatrixXd U = dense(ops.U), A = dense(ops.A), B = dense(ops.B), M = dense(ops.M);
    const Index nx = A.rows(), nn = M.rows();
    Eigen::MatrixXd K(nx + nn, nx + nn);
    K.topLeftCorner(nx, nx) = U.transpose() * U + ops.alpha * A.transpose() * A;
    K.topRightCorner(nx, nn) = -ops.alpha * A.transpose() * B;
    K.bottomLeftCorner(nn, nx) = -ops.alpha * B.transpose() * A;
    K.bottomRightCorner(nn, nn) =
        ops.alpha * B.transpose() * B + ops.beta * M + ops.gamma * Eigen::MatrixXd::Identity(nn, nn);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nx + nn);
    b.head(nx) = U.transpose() * Eigen::VectorXd::Constant(U.rows(), 0.5);
    return {K, b};
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Points uniformly inside a ball around the cube center.
inline Vec3List random_ball(std::size_t n, double radius, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec3List pts;
    while (pts.size() < n) {
        Vec3 v(u(rng), u(rng), u(rng));
        if (v.norm() <= 1.0) pts.push_back(Vec3::Constant(0.5) + radius * v);
    }
    return pts;
}

struct ToyProblem {
    Vec3List points;
    Octree tree;
    KnnGraph graph;
    SystemOperators ops;
};

// N=20 points on a small sphere at D=3, weights large enough that every block matters.
inline ToyProblem toy_problem(double alpha = 10.0, double beta = 0.5, double gamma = 0.25) {
    ToyProblem t;
    auto cloud = normalize(synth_shape(ShapeKind::Sphere, ShapeParams{}, 20, 11));
    t.points = cloud.positions;
    t.tree = Octree::build(t.points, 3);
    t.graph = build_knn_graph(t.points, 5);
    AssemblyOptions ao;
    ao.alpha = alpha;
    ao.beta = beta;
    ao.gamma = gamma;
    t.ops = eliminate_boundary(assemble_operators(t.points, t.tree, t.graph, ao), t.tree);
    return t;
}

inline double direct_local_energy(const Vec3List& pts, const KnnGraph& g, const std::vector<double>& n, bool squared) {
    double ed = 0.0, ecod = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (Index jj : g.neighbors[i]) {
            const auto j = static_cast<std::size_t>(jj);
            const Vec3 ni(n[3 * i], n[3 * i + 1], n[3 * i + 2]), nj(n[3 * j], n[3 * j + 1], n[3 * j + 2]);
            const Vec3 d = pts[j] - pts[i];
            const double dist = d.norm();
            const double w = std::exp(-(squared ? dist * dist : dist) / (g.rho * g.rho));
            ed += 0.5 * w * (ni - nj).squaredNorm();
            const double c = (ni + nj).dot(d / dist);
            ecod += w * c * c;
        }
    return ed + ecod;
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace oracle
