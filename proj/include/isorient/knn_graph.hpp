#pragma once

#include "isorient/kdtree.hpp"


namespace isorient {

/// Symmetrised k-nearest-neighbour graph. (i, j) is an edge iff i is among the
/// k nearest of j or j among the k nearest of i.
struct KnnGraph {
    std::size_t k = 10;
    std::vector<std::pair<Index, Index>> edges;   // i < j, lexicographically sorted
    std::vector<std::vector<Index>> neighbors;   // sorted, symmetric
    double rho = 0.0;                            // max edge length / 2
};

inline KnnGraph build_knn_graph(const Vec3List& points, std::size_t k) {
    const std::size_t n = points.size();
    if (n < 2) throw InputError("knn graph: need at least 2 points");
    if (k < 1 || k >= n) throw InputError("knn graph: k must satisfy 1 <= k < N (k=" + std::to_string(k) + ")");
    KdTree tree(points);
    std::vector<std::vector<Index>> knn(n);
#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < static_cast<Index>(n); ++i) {
        auto hits = tree.knn(points[static_cast<std::size_t>(i)], k, i);
        auto& row = knn[static_cast<std::size_t>(i)];
        row.reserve(hits.size());
        for (const auto& h : hits) row.push_back(h.index);
    }
    KnnGraph g;
    g.k = k;
    g.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (Index j : knn[i]) {
            g.neighbors[i].push_back(j);
            g.neighbors[static_cast<std::size_t>(j)].push_back(static_cast<Index>(i));
        }
    }
    double max_len = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& nb = g.neighbors[i];
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        for (Index j : nb) {
            if (static_cast<Index>(i) < j) {
                g.edges.emplace_back(static_cast<Index>(i), j);
                max_len = std::max(max_len, (points[i] - points[static_cast<std::size_t>(j)]).norm());
            }
        }
    }
    g.rho = 0.5 * max_len;
    return g;
}

}  // namespace isorient
