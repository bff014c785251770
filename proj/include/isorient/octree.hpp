#pragma once

#include "isorient/bspline.hpp"

#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace isorient {

struct OctNode {
    NodeCoord coord;
    Index parent = -1;
    bool boundary = false;
};

/// Adaptive octree over the unit cube.
///
/// Depths 0-2 are complete. Below that, a node exists when it lies on the
/// path to a sample's depth-D cell or to one of the 26 same-depth neighbours
/// of that cell. Nodes are indexed by depth, then by Morton (z-order) code.
///
/// A node is a boundary node when its basis is nonzero somewhere on the cube
/// faces, i.e. its offset is 0 or 2^d - 1 along some axis.
class Octree {
public:
    static constexpr int kMaxSupportedDepth = 12;
    static constexpr int kFullDepth = 2;

    static Octree build(const Vec3List& points, int max_depth) {
        if (max_depth < 1 || max_depth > kMaxSupportedDepth)
            throw InputError("octree: depth must lie in [1, " + std::to_string(kMaxSupportedDepth) + "]");
        Octree t;
        t.max_depth_ = max_depth;
        std::unordered_set<std::uint64_t> keys;
        const int full = std::min(kFullDepth, max_depth);
        for (int d = 0; d <= full; ++d) {
            const Index res = Index{1} << d;
            for (Index x = 0; x < res; ++x)
                for (Index y = 0; y < res; ++y)
                    for (Index z = 0; z < res; ++z) keys.insert(pack({d, {x, y, z}}));
        }
        const Index res = Index{1} << max_depth;
        std::vector<std::array<Index, 3>> cells(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) cells[i] = cell_of(points[i], max_depth, i);
        for (const auto& c : cells) {
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz) {
                        NodeCoord nc{max_depth, {c[0] + dx, c[1] + dy, c[2] + dz}};
                        if (!in_domain(nc.offset, res)) continue;
                        while (keys.insert(pack(nc)).second && nc.depth > 0) nc = parent_of(nc);
                    }
        }

        std::vector<std::pair<std::uint64_t, std::uint64_t>> order;  // (depth, morton) -> key
        order.reserve(keys.size());
        for (auto k : keys) {
            const NodeCoord nc = unpack(k);
            order.emplace_back((static_cast<std::uint64_t>(nc.depth) << 60) | morton(nc.offset), k);
        }
        std::sort(order.begin(), order.end());
        t.nodes_.resize(order.size());
        t.index_.reserve(order.size());
        t.depth_begin_.assign(static_cast<std::size_t>(max_depth) + 2, 0);
        for (std::size_t i = 0; i < order.size(); ++i) {
            const NodeCoord nc = unpack(order[i].second);
            t.nodes_[i].coord = nc;
            t.index_.emplace(order[i].second, static_cast<Index>(i));
            const Index r = Index{1} << nc.depth;
            bool b = false;
            for (auto o : nc.offset) b = b || o == 0 || o == r - 1;
            t.nodes_[i].boundary = b;
            t.depth_begin_[static_cast<std::size_t>(nc.depth) + 1] = static_cast<Index>(i) + 1;
        }
        for (std::size_t d = 1; d < t.depth_begin_.size(); ++d)
            t.depth_begin_[d] = std::max(t.depth_begin_[d], t.depth_begin_[d - 1]);
        for (auto& n : t.nodes_)
            if (n.coord.depth > 0) n.parent = t.find(parent_of(n.coord));
        t.point_nodes_.resize(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) t.point_nodes_[i] = t.find({max_depth, cells[i]});
        return t;
    }

    int max_depth() const { return max_depth_; }
    std::size_t size() const { return nodes_.size(); }
    const OctNode& node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
    const std::vector<OctNode>& nodes() const { return nodes_; }

    // Index of the node at `c`, or -1.
    Index find(const NodeCoord& c) const {
        const Index res = Index{1} << c.depth;
        if (c.depth < 0 || c.depth > max_depth_ || !in_domain(c.offset, res)) return -1;
        auto it = index_.find(pack(c));
        return it == index_.end() ? -1 : it->second;
    }

    // Nodes of depth d occupy the index range [depth_begin(d), depth_begin(d+1)).
    Index depth_begin(int d) const { return depth_begin_[static_cast<std::size_t>(d)]; }
    Index depth_end(int d) const { return depth_begin_[static_cast<std::size_t>(d) + 1]; }

    // Depth-D node containing each sample.
    const std::vector<Index>& point_nodes() const { return point_nodes_; }

    std::size_t boundary_count() const {
        return static_cast<std::size_t>(
            std::count_if(nodes_.begin(), nodes_.end(), [](const OctNode& n) { return n.boundary; }));
    }

    /// Existing nodes among the 3x3x3 same-depth block around `node`
    /// (including the node itself), in index order.
    std::vector<Index> depth_neighbors(Index node_index) const {
        const NodeCoord& c = node(node_index).coord;
        std::vector<Index> out;
        out.reserve(27);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    Index j = find({c.depth, {c.offset[0] + dx, c.offset[1] + dy, c.offset[2] + dz}});
                    if (j >= 0) out.push_back(j);
                }
        std::sort(out.begin(), out.end());
        return out;
    }

    // One `depth ix iy iz is_boundary` line per node, in index order.
    void dump(std::ostream& os) const {
        for (const auto& n : nodes_)
            os << n.coord.depth << ' ' << n.coord.offset[0] << ' ' << n.coord.offset[1] << ' ' << n.coord.offset[2]
               << ' ' << (n.boundary ? 1 : 0) << '\n';
    }

    static std::array<Index, 3> cell_of(const Vec3& p, int depth, std::size_t point_index = 0) {
        const Index res = Index{1} << depth;
        std::array<Index, 3> c{};
        for (int a = 0; a < 3; ++a) {
            if (!(p[a] >= 0.0 && p[a] <= 1.0))
                throw InputError("octree: point " + std::to_string(point_index) + " lies outside the unit cube");
            c[static_cast<std::size_t>(a)] = std::min(res - 1, static_cast<Index>(std::floor(p[a] * static_cast<double>(res))));
        }
        return c;
    }

    static NodeCoord parent_of(const NodeCoord& c) {
        return {c.depth - 1, {c.offset[0] >> 1, c.offset[1] >> 1, c.offset[2] >> 1}};
    }

private:
    static bool in_domain(const std::array<Index, 3>& o, Index res) {
        return o[0] >= 0 && o[1] >= 0 && o[2] >= 0 && o[0] < res && o[1] < res && o[2] < res;
    }

    static std::uint64_t pack(const NodeCoord& c) {
        return (static_cast<std::uint64_t>(c.depth) << 48) | (static_cast<std::uint64_t>(c.offset[0]) << 32) |
               (static_cast<std::uint64_t>(c.offset[1]) << 16) | static_cast<std::uint64_t>(c.offset[2]);
    }

    static NodeCoord unpack(std::uint64_t k) {
        return {static_cast<int>(k >> 48),
                {static_cast<Index>((k >> 32) & 0xffff), static_cast<Index>((k >> 16) & 0xffff),
                 static_cast<Index>(k & 0xffff)}};
    }

    static std::uint64_t morton(const std::array<Index, 3>& o) {
        std::uint64_t m = 0;
        for (int bit = 0; bit < kMaxSupportedDepth; ++bit)
            for (int a = 0; a < 3; ++a)
                m |= ((static_cast<std::uint64_t>(o[static_cast<std::size_t>(a)]) >> bit) & 1u) << (3 * bit + a);
        return m;
    }

    int max_depth_ = 0;
    std::vector<OctNode> nodes_;
    std::unordered_map<std::uint64_t, Index> index_;
    std::vector<Index> depth_begin_;
    std::vector<Index> point_nodes_;
};

}  // namespace isorient
