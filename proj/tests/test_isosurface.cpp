#include "oracles.hpp"

#include "isorient/isosurface.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace isorient;

namespace {

ScalarGrid analytic_grid(Index res, double lo, double hi, const std::function<double(const Vec3&)>& f) {
    ScalarGrid g;
    g.resolution = {res, res, res};
    g.origin = Vec3::Constant(lo);
    g.spacing = (hi - lo) / static_cast<double>(res - 1);
    g.values.resize(static_cast<std::size_t>(res * res * res));
    for (Index z = 0; z < res; ++z)
        for (Index y = 0; y < res; ++y)
            for (Index x = 0; x < res; ++x) g.values[g.index(x, y, z)] = f(g.position(x, y, z));
    return g;
}

struct Solved {
    Octree tree;
    SparseMatrix U;
    std::vector<double> coeffs;
    Vec3List points;
};

Solved random_coefficients(int depth, std::uint64_t seed) {
    Solved s;
    s.points = normalize(synth_shape(ShapeKind::Torus, ShapeParams{}, 500, seed)).positions;
    s.tree = Octree::build(s.points, depth);
    s.U = assemble_point_eval(s.points, s.tree);
    std::mt19937_64 rng(seed);
    s.coeffs = oracle::random_vector(s.tree.size(), rng);
    return s;
}

}  // namespace

TEST(MarchingCubes, ConstantGridIsEmpty) {
    auto g = analytic_grid(8, 0.0, 1.0, [](const Vec3&) { return 0.2; });
    auto m = marching_cubes(g);
    EXPECT_TRUE(m.vertices.empty());
    EXPECT_TRUE(m.triangles.empty());
}

TEST(MarchingCubes, RadialFieldIsClosedSphere) {
    auto g = analytic_grid(64, -1.0, 1.0, [](const Vec3& p) { return 1.0 - p.norm(); });
    auto m = marching_cubes(g, 0.5);
    ASSERT_FALSE(m.triangles.empty());
    EXPECT_TRUE(is_closed(m));
    EXPECT_EQ(euler_characteristic(m), 2);
    EXPECT_EQ(connected_components(m), 1u);
    for (const auto& v : m.vertices) EXPECT_LE(std::abs(v.norm() - 0.5), 0.5 * g.spacing);
    // triangles wind outward, toward decreasing field
    double flux = 0.0;
    for (const auto& t : m.triangles) {
        const Vec3 a = m.vertices[static_cast<std::size_t>(t[0])], b = m.vertices[static_cast<std::size_t>(t[1])],
                   c = m.vertices[static_cast<std::size_t>(t[2])];
        flux += (b - a).cross(c - a).dot((a + b + c) / 3.0);
    }
    EXPECT_GT(flux, 0.0);
}

TEST(MarchingCubes, RandomFieldsAreWatertight) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        ScalarGrid g;
        g.resolution = {6, 6, 6};
        g.values.resize(216);
        for (Index z = 0; z < 6; ++z)
            for (Index y = 0; y < 6; ++y)
                for (Index x = 0; x < 6; ++x) {
                    const bool border = x == 0 || y == 0 || z == 0 || x == 5 || y == 5 || z == 5;
                    g.values[g.index(x, y, z)] = border ? 0.0 : u(rng);
                }
        auto m = marching_cubes(g, 0.5);
        EXPECT_TRUE(is_closed(m)) << "field " << k;
    }
}

TEST(MarchingCubes, NestedShellsCountComponents) {
    // indicator of the shells 0.2 < r < 0.3 and 0.4 < r < 0.5, sampled smoothly
    auto f = [](const Vec3& p) {
        const double r = p.norm();
        const double d = std::min({std::abs(r - 0.25), std::abs(r - 0.45)});
        return 1.0 - d / 0.05 * 0.5;
    };
    auto m = marching_cubes(analytic_grid(96, -0.6, 0.6, f), 0.5);
    EXPECT_TRUE(is_closed(m));
    EXPECT_EQ(connected_components(m), 4u);
}

TEST(SampleField, ZeroCoefficientsGiveZeroGrid) {
    auto s = random_coefficients(4, 1);
    auto g = sample_field(s.tree, std::vector<double>(s.tree.size(), 0.0), 9);
    for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(SampleField, MatchesPointEvaluation) {
    auto s = random_coefficients(5, 2);
    const auto ux = s.U * s.coeffs;
    for (std::size_t i = 0; i < s.points.size(); ++i)
        EXPECT_NEAR(evaluate_field(s.tree, s.coeffs, s.points[i]), ux[i], 1e-12 * std::max(1.0, std::abs(ux[i])));
    auto g = sample_field(s.tree, s.coeffs, 17);
    for (Index z = 0; z < 17; z += 3)
        for (Index y = 0; y < 17; y += 2)
            for (Index x = 0; x < 17; ++x)
                EXPECT_NEAR(g.values[g.index(x, y, z)], evaluate_field(s.tree, s.coeffs, g.position(x, y, z)), 1e-12);
}

TEST(SampleField, Linear) {
    auto s = random_coefficients(4, 3);
    std::mt19937_64 rng(8);
    const auto x2 = oracle::random_vector(s.tree.size(), rng);
    std::vector<double> sum(s.coeffs.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = s.coeffs[i] + x2[i];
    auto a = sample_field(s.tree, s.coeffs, 11), b = sample_field(s.tree, x2, 11), c = sample_field(s.tree, sum, 11);
    for (std::size_t i = 0; i < c.values.size(); ++i) EXPECT_NEAR(c.values[i], a.values[i] + b.values[i], 1e-12);
}

TEST(SampleField, ResolutionBounds) {
    auto s = random_coefficients(3, 4);
    auto g = sample_field(s.tree, s.coeffs, 2);
    EXPECT_EQ(g.values.size(), 8u);
    EXPECT_DOUBLE_EQ(g.spacing, 1.0);
    EXPECT_TRUE(marching_cubes(g).vertices.size() < 100);
    EXPECT_THROW(sample_field(s.tree, s.coeffs, 1), InputError);
    EXPECT_THROW(sample_field(s.tree, s.coeffs, 513), InputError);
    EXPECT_THROW(sample_field(s.tree, std::vector<double>(3), 4), InputError);
}

TEST(Export, GridHeaderAndMeshIsovalue) {
    auto g = analytic_grid(3, 0.0, 1.0, [](const Vec3& p) { return p.x(); });
    std::ostringstream gs;
    g.write(gs);
    std::istringstream in(gs.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "3 3 3 0 0 0 0.5");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 27u);

    auto m = marching_cubes(analytic_grid(16, -1.0, 1.0, [](const Vec3& p) { return 1.0 - p.norm(); }), 0.5);
    std::ostringstream ply, obj;
    write_mesh_ply(ply, m, 0.5);
    write_mesh_obj(obj, m, 0.5);
    EXPECT_NE(ply.str().find("comment isovalue 0.5"), std::string::npos);
    EXPECT_EQ(obj.str().rfind("# isovalue 0.5", 0), 0u);
}
