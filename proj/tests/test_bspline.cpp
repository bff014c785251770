#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace isorient;

TEST(Bspline, EvalAtCenterAndEnds) {
    const Basis1D b{3, 5};
    EXPECT_DOUBLE_EQ(eval_1d(b, b.center()), 0.75);
    EXPECT_EQ(eval_1d(b, b.center() + 1.5 * b.width()), 0.0);
    EXPECT_EQ(eval_1d(b, b.center() - 1.5 * b.width()), 0.0);
    EXPECT_DOUBLE_EQ(eval_1d(b, b.center() + 0.5 * b.width()), 0.5);
}

TEST(Bspline, Eval3dCenterAndOutside) {
    const NodeCoord n{2, {1, 2, 3}};
    EXPECT_DOUBLE_EQ(eval_3d(n, n.center()), 27.0 / 64.0);
    const Vec3 far = n.center() + Vec3(2.0 * n.width(), 0.0, 0.0);
    EXPECT_EQ(eval_3d(n, far), 0.0);
    EXPECT_EQ(grad_3d(n, far).norm(), 0.0);
}

TEST(Bspline, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.4, 1.4);
    for (int k = 0; k < 100; ++k) {
        const NodeCoord n{4, {5, 7, 9}};
        const Vec3 q = n.center() + n.width() * Vec3(u(rng), u(rng), u(rng));
        const Vec3 g = grad_3d(n, q);
        const double h = 1e-7;
        Vec3 fd;
        for (int a = 0; a < 3; ++a) {
            Vec3 e = Vec3::Zero();
            e[a] = h;
            fd[a] = (eval_3d(n, q + e) - eval_3d(n, q - e)) / (2.0 * h);
        }
        EXPECT_LE((fd - g).norm(), 1e-6 * std::max(g.norm(), 1.0)) << "sample " << k;
    }
}

TEST(Bspline, UnitWidthIntegrals) {
    const Basis1D b{0, 0};
    EXPECT_NEAR(inner_1d(b, b, InnerMode::DerDer), 1.0, 1e-15);
    EXPECT_NEAR(inner_1d(b, b, InnerMode::ValVal), 11.0 / 20.0, 1e-15);
    EXPECT_NEAR(oracle::inner_1d_quadrature(b, b, InnerMode::DerDer).first, 1.0, 1e-14);
    EXPECT_NEAR(oracle::inner_1d_quadrature(b, b, InnerMode::ValVal).first, 11.0 / 20.0, 1e-14);
    EXPECT_EQ(inner_1d(Basis1D{3, 1}, Basis1D{3, 4}, InnerMode::ValVal), 0.0);
    EXPECT_EQ(inner_1d(Basis1D{3, 1}, Basis1D{3, 4}, InnerMode::DerDer), 0.0);
}

TEST(Bspline, DerValAntisymmetricAtSameDepth) {
    for (Index off = -2; off <= 2; ++off) {
        const Basis1D a{4, 6}, b{4, 6 + off};
        EXPECT_NEAR(inner_1d(a, b, InnerMode::DerVal), -inner_1d(b, a, InnerMode::DerVal), 1e-14);
    }
}

TEST(Bspline, ScalingLaws) {
    const Basis1D unit{0, 0};
    const double vv = inner_1d(unit, unit, InnerMode::ValVal), dd = inner_1d(unit, unit, InnerMode::DerDer);
    const double dv = inner_1d(unit, Basis1D{0, 1}, InnerMode::DerVal);
    for (int d = 0; d <= 7; ++d) {
        const Basis1D a{d, 3}, b{d, 4};
        const double w = a.width();
        EXPECT_NEAR(inner_1d(a, a, InnerMode::ValVal), w * vv, 1e-12 * w);
        EXPECT_NEAR(inner_1d(a, a, InnerMode::DerDer), dd / w, 1e-12 / w);
        EXPECT_NEAR(inner_1d(a, b, InnerMode::DerVal), dv, 1e-12);
    }
}

TEST(Bspline, CrossDepthIntegralsMatchQuadrature) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> depth(0, 7);
    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
        const int da = depth(rng), db = depth(rng);
        std::uniform_int_distribution<Index> oa(0, (Index{1} << da) - 1);
        const Basis1D a{da, oa(rng)};
        const auto range = InnerProductTable::overlap_range(da, a.offset, db);
        std::uniform_int_distribution<Index> ob(range.first - 1, range.second + 1);
        const Basis1D b{db, ob(rng)};
        for (auto mode : {InnerMode::ValVal, InnerMode::DerDer, InnerMode::DerVal}) {
            const auto [q, mag] = oracle::inner_1d_quadrature(a, b, mode);
            const double v = inner_1d(a, b, mode);
            EXPECT_LE(std::abs(v - q), 1e-12 * std::max(std::abs(q), mag))
                << "depths " << da << "," << db << " offsets " << a.offset << "," << b.offset;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 3000);
}

TEST(Bspline, TableMatchesDirectIntegrals) {
    const InnerProductTable table(5);
    for (int da = 0; da <= 5; ++da)
        for (int db = 0; db <= 5; ++db) {
            const Index oa = (Index{1} << da) / 2;
            const auto r = InnerProductTable::overlap_range(da, oa, db);
            for (Index ob = r.first - 2; ob <= r.second + 2; ++ob) {
                const Basis1D a{da, oa}, b{db, ob};
                const auto e = table.get(da, oa, db, ob);
                EXPECT_NEAR(e.val_val, inner_1d(a, b, InnerMode::ValVal), 1e-15);
                EXPECT_NEAR(e.der_der, inner_1d(a, b, InnerMode::DerDer), 1e-11);
                EXPECT_NEAR(e.der_val, inner_1d(a, b, InnerMode::DerVal), 1e-13);
                EXPECT_NEAR(e.val_der, inner_1d(b, a, InnerMode::DerVal), 1e-13);
            }
        }
}

TEST(Bspline, PartitionOfUnity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.25, 0.75);
    for (int d = 2; d <= 7; ++d)
        for (int k = 0; k < 20; ++k) {
            const double t = u(rng);
            double s = 0.0;
            for (Index o = 0; o < (Index{1} << d); ++o) s += eval_1d({d, o}, t);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
}
