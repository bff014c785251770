#include "isorient/cloud.hpp"
#include "isorient/octree.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace isorient;

namespace {

using Key = std::tuple<int, Index, Index, Index>;

// Top-down recursive construction: a node exists when its depth is at most 2
// or some required depth-D cell lies inside it.
void naive_visit(int d, std::array<Index, 3> o, int max_depth, const std::set<std::array<Index, 3>>& required,
                 std::set<Key>& out) {
    bool needed = d <= 2;
    const Index shift = max_depth - d;
    for (const auto& c : required) {
        if ((c[0] >> shift) == o[0] && (c[1] >> shift) == o[1] && (c[2] >> shift) == o[2]) {
            needed = true;
            break;
        }
    }
    if (!needed) return;
    out.insert({d, o[0], o[1], o[2]});
    if (d == max_depth) return;
    for (Index k = 0; k < 8; ++k)
        naive_visit(d + 1, {2 * o[0] + (k & 1), 2 * o[1] + ((k >> 1) & 1), 2 * o[2] + ((k >> 2) & 1)}, max_depth,
                    required, out);
}

std::set<Key> naive_build(const Vec3List& pts, int max_depth) {
    const Index res = Index{1} << max_depth;
    std::set<std::array<Index, 3>> required;
    for (const auto& p : pts) {
        std::array<Index, 3> c{};
        for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = std::min(res - 1, static_cast<Index>(p[a] * res));
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    std::array<Index, 3> n{c[0] + dx, c[1] + dy, c[2] + dz};
                    if (std::all_of(n.begin(), n.end(), [&](Index v) { return v >= 0 && v < res; })) required.insert(n);
                }
    }
    std::set<Key> out;
    naive_visit(0, {0, 0, 0}, max_depth, required, out);
    return out;
}

std::set<Key> keys_of(const Octree& t) {
    std::set<Key> out;
    for (const auto& n : t.nodes()) out.insert({n.coord.depth, n.coord.offset[0], n.coord.offset[1], n.coord.offset[2]});
    return out;
}

// The support [c - 1.5w, c + 1.5w] reaches past the unit cube on some axis.
bool support_crosses_boundary(const NodeCoord& c) {
    for (int a = 0; a < 3; ++a) {
        const Basis1D b = c.axis(a);
        if (b.support_lo() < 0.0 || b.support_hi() > 1.0) return true;
    }
    return false;
}

}  // namespace

TEST(Octree, CompleteAtDepthTwo) {
    auto t = Octree::build({Vec3(0.3, 0.6, 0.2)}, 2);
    EXPECT_EQ(t.size(), 73u);
}

TEST(Octree, SinglePointMatchesNaiveBuilder) {
    const double eps = 1e-3;
    Vec3List pts{Vec3(0.5 + eps, 0.5 + eps, 0.5 + eps)};
    auto t = Octree::build(pts, 3);
    EXPECT_EQ(keys_of(t), naive_build(pts, 3));
    const Index home = t.point_nodes()[0];
    EXPECT_EQ(t.depth_neighbors(home).size(), 27u);
}

TEST(Octree, RandomCloudsMatchNaiveBuilder) {
    for (int d : {3, 4, 5}) {
        auto pts = normalize(synth_shape(ShapeKind::Torus, ShapeParams{}, 300, static_cast<std::uint64_t>(d))).positions;
        EXPECT_EQ(keys_of(Octree::build(pts, d)), naive_build(pts, d)) << "depth " << d;
    }
}

TEST(Octree, BoundarySetMatchesSupportCheck) {
    auto pts = normalize(synth_shape(ShapeKind::Sphere, ShapeParams{}, 500, 1)).positions;
    auto t = Octree::build(pts, 5);
    std::size_t shell2 = 0;
    for (const auto& n : t.nodes()) {
        EXPECT_EQ(n.boundary, support_crosses_boundary(n.coord));
        if (n.coord.depth <= 1) {
            EXPECT_TRUE(n.boundary);
        }
        if (n.coord.depth == 2 && n.boundary) ++shell2;
    }
    EXPECT_EQ(shell2, 56u);
}

TEST(Octree, NoOrphansAndSortedByDepth) {
    auto pts = normalize(synth_shape(ShapeKind::NestedSpheres, ShapeParams{}, 1000, 2)).positions;
    auto t = Octree::build(pts, 5);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& n = t.nodes()[i];
        if (n.coord.depth == 0) continue;
        ASSERT_GE(n.parent, 0);
        EXPECT_EQ(t.node(n.parent).coord.depth, n.coord.depth - 1);
        if (i > 0) {
            EXPECT_GE(n.coord.depth, t.nodes()[i - 1].coord.depth);
        }
    }
    for (int d = 0; d <= 5; ++d)
        for (Index i = t.depth_begin(d); i < t.depth_end(d); ++i) EXPECT_EQ(t.node(i).coord.depth, d);
}

TEST(Octree, StencilCompleteness) {
    auto pts = normalize(synth_shape(ShapeKind::ThinSlab, ShapeParams{}, 800, 3)).positions;
    auto t = Octree::build(pts, 6);
    const Index res = Index{1} << 6;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const NodeCoord& c = t.node(t.point_nodes()[i]).coord;
        EXPECT_EQ(c.depth, 6);
        for (int a = 0; a < 3; ++a) {
            EXPECT_LE(c.axis(a).center() - 0.5 * c.width(), pts[i][a]);
            EXPECT_GE(c.axis(a).center() + 0.5 * c.width(), pts[i][a]);
        }
        std::size_t expected = 1;
        for (auto o : c.offset) expected *= static_cast<std::size_t>(1 + (o > 0) + (o < res - 1));
        EXPECT_EQ(t.depth_neighbors(t.point_nodes()[i]).size(), expected);
    }
}

TEST(Octree, CornerNodeHasEightNeighbors) {
    auto t = Octree::build({Vec3(0.01, 0.01, 0.01)}, 3);
    EXPECT_EQ(t.depth_neighbors(t.point_nodes()[0]).size(), 8u);
}

TEST(Octree, UnrefinedSiblingsAreSkipped) {
    auto t = Octree::build({Vec3(0.5 + 1e-3, 0.5 + 1e-3, 0.5 + 1e-3)}, 5);
    // only offsets 3 and 4 are refined to depth 3
    const Index node = t.find({3, {3, 3, 3}});
    ASSERT_GE(node, 0);
    EXPECT_EQ(t.depth_neighbors(node).size(), 8u);
}

TEST(Octree, DeterministicAndMonotone) {
    auto pts = normalize(synth_shape(ShapeKind::Torus, ShapeParams{}, 2000, 5)).positions;
    std::ostringstream a, b;
    Octree::build(pts, 5).dump(a);
    Octree::build(pts, 5).dump(b);
    EXPECT_EQ(a.str(), b.str());
    std::size_t prev = 0;
    for (int d = 2; d <= 7; ++d) {
        const std::size_t n = Octree::build(pts, d).size();
        EXPECT_GE(n, prev);
        prev = n;
    }
}

TEST(Octree, SurfaceAdaptiveGrowth) {
    auto pts = normalize(synth_shape(ShapeKind::Sphere, ShapeParams{}, 20000, 6)).positions;
    const double n4 = static_cast<double>(Octree::build(pts, 4).size());
    const double n5 = static_cast<double>(Octree::build(pts, 5).size());
    const double n6 = static_cast<double>(Octree::build(pts, 6).size());
    // 4x per level for a surface, 8x for a volume
    EXPECT_LT(n6 / n5, 6.0);
    EXPECT_LT(n5 / n4, 6.0);
}

TEST(Octree, RejectsBadInput) {
    EXPECT_THROW(Octree::build({Vec3(1.5, 0.5, 0.5)}, 3), InputError);
    EXPECT_THROW(Octree::build({Vec3(0.5, 0.5, 0.5)}, 0), InputError);
}
