#pragma once

#include "isorient/cloud.hpp"
#include "isorient/kdtree.hpp"
#include "isorient/knn_graph.hpp"

#include <Eigen/Eigenvalues>

namespace isorient {

enum class NormalSource { FlippedFitted, OptimizedNormalized };

struct FittedNormals {
    Vec3List normals;           // unit, sign arbitrary
    std::vector<char> degenerate;  // neighbourhood covariance of rank < 2
};

struct OrientationResult {
    Vec3List normals;  // unit, outward
    std::vector<NormalSource> source;
    std::vector<Index> rep_indices;  // empty: every point was optimized
};

namespace detail {

// Makes the first nonzero component positive.
inline Vec3 canonical_sign(Vec3 n) {
    for (int a = 0; a < 3; ++a) {
        if (n[a] > 0.0) return n;
        if (n[a] < 0.0) return -n;
    }
    return n;
}

inline Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> covariance_eigen(const Vec3List& pts, const Index* idx,
                                                                        std::size_t count) {
    Vec3 mean = Vec3::Zero();
    for (std::size_t k = 0; k < count; ++k) mean += pts[static_cast<std::size_t>(idx[k])];
    mean /= static_cast<double>(count);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < count; ++k) {
        const Vec3 d = pts[static_cast<std::size_t>(idx[k])] - mean;
        cov += d * d.transpose();
    }
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov);
}

inline bool rank_below_two(const Eigen::Vector3d& evals) {
    // eigenvalues ascending
    return !(evals[1] > 1e-12 * std::max(evals[2], 1e-300));
}

}  // namespace detail

/// PCA plane fit over N(i) plus the point itself; the normal is the
/// eigenvector of the smallest covariance eigenvalue.
inline FittedNormals estimate_unoriented(const Vec3List& points, const KnnGraph& graph) {
    const std::size_t n = points.size();
    FittedNormals out;
    out.normals.resize(n);
    out.degenerate.assign(n, 0);

    std::vector<Index> all(n);
    std::iota(all.begin(), all.end(), Index{0});
    Vec3 global = Vec3::UnitZ();
    if (n >= 3) {
        auto es = detail::covariance_eigen(points, all.data(), n);
        global = es.eigenvectors().col(0).normalized();
    }
    global = detail::canonical_sign(global);

#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < static_cast<Index>(n); ++i) {
        const auto& nb = graph.neighbors[static_cast<std::size_t>(i)];
        std::vector<Index> idx(nb.begin(), nb.end());
        idx.push_back(i);
        bool degenerate = idx.size() < 3;
        Vec3 normal = global;
        if (!degenerate) {
            auto es = detail::covariance_eigen(points, idx.data(), idx.size());
            if (detail::rank_below_two(es.eigenvalues()))
                degenerate = true;
            else
                normal = detail::canonical_sign(es.eigenvectors().col(0).normalized());
        }
        out.normals[static_cast<std::size_t>(i)] = normal;
        out.degenerate[static_cast<std::size_t>(i)] = degenerate ? 1 : 0;
    }
    return out;
}

/// Keeps fitted[i] when fitted[i] . reference[i] >= 0, otherwise negates it.
/// With the optimized normals as reference this yields inward normals.
inline Vec3List flip_by_reference(const Vec3List& fitted, const Vec3List& reference) {
    if (fitted.size() != reference.size()) throw InputError("flip: size mismatch");
    Vec3List out(fitted.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) out[i] = fitted[i].dot(reference[i]) >= 0.0 ? fitted[i] : Vec3(-fitted[i]);
    return out;
}

inline Vec3List negate_all(Vec3List normals) {
    for (auto& v : normals) v = -v;
    return normals;
}

struct NormalizedOptimized {
    Vec3List normals;
    std::vector<char> fallback;  // optimized normal vanished; flipped fitted normal used
};

/// Optimized normals scaled to unit length. Near-zero vectors are replaced by
/// the corresponding entry of `fallback`.
inline NormalizedOptimized use_optimized(const Vec3List& optimized, const Vec3List& fallback) {
    if (optimized.size() != fallback.size()) throw InputError("use_optimized: size mismatch");
    NormalizedOptimized out;
    out.normals.resize(optimized.size());
    out.fallback.assign(optimized.size(), 0);
    for (std::size_t i = 0; i < optimized.size(); ++i) {
        const double len = optimized[i].norm();
        if (len < 1e-12) {
            out.normals[i] = fallback[i];
            out.fallback[i] = 1;
        } else {
            out.normals[i] = optimized[i] / len;
        }
    }
    return out;
}

inline std::size_t representative_count(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("representative fraction must lie in (0, 1]");
    return std::min(n, static_cast<std::size_t>(std::ceil(static_cast<double>(n) * fraction - 1e-9)));
}

/// Uniform random subset without replacement, returned in ascending order.
inline std::vector<Index> subsample_representatives(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw InputError("representative count must be positive");
    if (count > n) throw InputError("representative count exceeds the point count");
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    if (count == n) return order;
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

/// Orients every point from the oriented representative set: representatives
/// keep their normals, the others take their fitted normal with the sign of
/// their nearest representative.
inline OrientationResult propagate_from_representatives(const Vec3List& points, const std::vector<Index>& rep_indices,
                                                        const Vec3List& rep_normals, const Vec3List& fitted) {
    if (rep_indices.empty()) throw InputError("propagate: empty representative set");
    if (rep_indices.size() != rep_normals.size()) throw InputError("propagate: representative size mismatch");
    if (fitted.size() != points.size()) throw InputError("propagate: fitted normal count mismatch");
    Vec3List rep_points;
    rep_points.reserve(rep_indices.size());
    for (Index r : rep_indices) rep_points.push_back(points[static_cast<std::size_t>(r)]);
    KdTree tree(rep_points);

    OrientationResult res;
    res.rep_indices = rep_indices;
    res.normals.resize(points.size());
    res.source.assign(points.size(), NormalSource::FlippedFitted);
    std::vector<Index> rep_slot(points.size(), -1);
    for (std::size_t k = 0; k < rep_indices.size(); ++k) rep_slot[static_cast<std::size_t>(rep_indices[k])] = static_cast<Index>(k);

#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < static_cast<Index>(points.size()); ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (rep_slot[si] >= 0) {
            res.normals[si] = rep_normals[static_cast<std::size_t>(rep_slot[si])];
            continue;
        }
        const auto hit = tree.nearest(points[si]);
        const Vec3& ref = rep_normals[static_cast<std::size_t>(hit.index)];
        res.normals[si] = fitted[si].dot(ref) >= 0.0 ? fitted[si] : Vec3(-fitted[si]);
    }
    return res;
}

struct AccuracyStats {
    double accuracy = 0.0;
    std::size_t n_points = 0;
    std::size_t n_correct = 0;
    bool over_97 = false;
    bool over_90 = false;
};

/// Fraction of normals with strictly positive dot product against ground truth.
inline AccuracyStats orientation_accuracy(const Vec3List& normals, const Vec3List& gt) {
    if (gt.empty()) throw InputError("accuracy: missing ground-truth normals");
    if (normals.size() != gt.size()) throw InputError("accuracy: point count mismatch");
    AccuracyStats s;
    s.n_points = normals.size();
    for (std::size_t i = 0; i < normals.size(); ++i)
        if (normals[i].dot(gt[i]) > 0.0) ++s.n_correct;
    s.accuracy = static_cast<double>(s.n_correct) / static_cast<double>(s.n_points);
    s.over_97 = s.accuracy > 0.97;
    s.over_90 = s.accuracy > 0.90;
    return s;
}

}  // namespace isorient
