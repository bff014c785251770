#pragma once

#include "isorient/common.hpp"

#include <numeric>
#include <queue>

namespace isorient {

// Static 3-d tree for exact k-nearest-neighbour queries. Ties in distance are
// resolved toward the lower point index, so results are fully deterministic.
class KdTree {
public:
    struct Hit {
        double dist2;
        Index index;
        bool operator<(const Hit& o) const { return dist2 != o.dist2 ? dist2 < o.dist2 : index < o.index; }
    };

    explicit KdTree(const Vec3List& points, std::size_t leaf_size = 12) : points_(&points), leaf_size_(leaf_size) {
        perm_.resize(points.size());
        std::iota(perm_.begin(), perm_.end(), Index{0});
        if (!points.empty()) build(0, perm_.size(), 0);
    }

    // k nearest points to q, ascending; `exclude` is skipped (pass -1 to keep all).
    std::vector<Hit> knn(const Vec3& q, std::size_t k, Index exclude = -1) const {
        std::priority_queue<Hit> heap;  // max-heap on (dist2, index)
        if (k > 0 && !nodes_.empty()) search(0, q, k, exclude, heap);
        std::vector<Hit> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    }

    Hit nearest(const Vec3& q) const {
        auto hits = knn(q, 1);
        if (hits.empty()) throw InputError("nearest-neighbour query on an empty set");
        return hits.front();
    }

private:
    struct Node {
        std::size_t begin = 0, end = 0;  // range in perm_ for leaves
        int axis = -1;                   // -1 marks a leaf
        double split = 0.0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end, int depth) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        if (end - begin <= leaf_size_) {
            nodes_[id].begin = begin;
            nodes_[id].end = end;
            return id;
        }
        Vec3 lo = (*points_)[static_cast<std::size_t>(perm_[begin])], hi = lo;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& p = (*points_)[static_cast<std::size_t>(perm_[i])];
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                         perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                         perm_.begin() + static_cast<std::ptrdiff_t>(end), [&](Index a, Index b) {
                             const double va = (*points_)[static_cast<std::size_t>(a)][axis];
                             const double vb = (*points_)[static_cast<std::size_t>(b)][axis];
                             return va != vb ? va < vb : a < b;
                         });
        const double split = (*points_)[static_cast<std::size_t>(perm_[mid])][axis];
        const std::size_t left = build(begin, mid, depth + 1);
        const std::size_t right = build(mid, end, depth + 1);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(std::size_t id, const Vec3& q, std::size_t k, Index exclude, std::priority_queue<Hit>& heap) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const Index idx = perm_[i];
                if (idx == exclude) continue;
                Hit h{((*points_)[static_cast<std::size_t>(idx)] - q).squaredNorm(), idx};
                if (heap.size() < k) {
                    heap.push(h);
                } else if (h < heap.top()) {
                    heap.pop();
                    heap.push(h);
                }
            }
            return;
        }
        // Left subtree holds coordinates <= split, right subtree >= split.
        const double diff = q[node.axis] - node.split;
        const std::size_t first = diff <= 0.0 ? node.left : node.right;
        const std::size_t second = diff <= 0.0 ? node.right : node.left;
        search(first, q, k, exclude, heap);
        // ties must still be visited so the lower index can win
        if (heap.size() < k || diff * diff <= heap.top().dist2) search(second, q, k, exclude, heap);
    }

    const Vec3List* points_;
    std::size_t leaf_size_;
    std::vector<Index> perm_;
    std::vector<Node> nodes_;
};

}  // namespace isorient
