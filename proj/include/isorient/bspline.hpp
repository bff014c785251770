#pragma once

#include "isorient/common.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace isorient {

/// Quadratic B-spline algebra on dyadic grids.
///
/// A basis at depth d with integer offset k is centred at (k + 1/2) 2^-d with
/// width 2^-d; its support spans 1.5 widths either side of the centre. The 3D
/// basis of an octree node is the tensor product of three such 1D bases.
namespace bspline {

// Cardinal quadratic B-spline, unit width, centred at 0.
inline double value(double u) {
    const double a = std::abs(u);
    if (a <= 0.5) return 0.75 - u * u;
    if (a <= 1.5) {
        const double s = 1.5 - a;
        return 0.5 * s * s;
    }
    return 0.0;
}

// d/du of value(u).
inline double derivative(double u) {
    if (u < -1.5 || u > 1.5) return 0.0;
    if (u < -0.5) return u + 1.5;
    if (u <= 0.5) return -2.0 * u;
    return u - 1.5;
}

inline double width_at(int depth) { return std::ldexp(1.0, -depth); }

}  // namespace bspline

struct Basis1D {
    int depth = 0;
    Index offset = 0;

    double width() const { return bspline::width_at(depth); }
    double center() const { return (static_cast<double>(offset) + 0.5) * width(); }
    double support_lo() const { return center() - 1.5 * width(); }
    double support_hi() const { return center() + 1.5 * width(); }
};

// Grid position of an octree node: depth plus integer offsets per axis.
struct NodeCoord {
    int depth = 0;
    std::array<Index, 3> offset{0, 0, 0};

    Basis1D axis(int a) const { return {depth, offset[static_cast<std::size_t>(a)]}; }
    double width() const { return bspline::width_at(depth); }
    Vec3 center() const {
        const double w = width();
        return {(static_cast<double>(offset[0]) + 0.5) * w, (static_cast<double>(offset[1]) + 0.5) * w,
                (static_cast<double>(offset[2]) + 0.5) * w};
    }
    bool operator==(const NodeCoord&) const = default;
};

enum class InnerMode { ValVal, DerDer, DerVal };

inline double eval_1d(const Basis1D& b, double t) { return bspline::value((t - b.center()) / b.width()); }

inline double deriv_1d(const Basis1D& b, double t) {
    return bspline::derivative((t - b.center()) / b.width()) / b.width();
}

inline double eval_3d(const NodeCoord& node, const Vec3& q) {
    double v = 1.0;
    for (int a = 0; a < 3; ++a) {
        v *= eval_1d(node.axis(a), q[a]);
        if (v == 0.0) return 0.0;
    }
    return v;
}

inline Vec3 grad_3d(const NodeCoord& node, const Vec3& q) {
    std::array<double, 3> val{}, der{};
    for (int a = 0; a < 3; ++a) {
        val[static_cast<std::size_t>(a)] = eval_1d(node.axis(a), q[a]);
        der[static_cast<std::size_t>(a)] = deriv_1d(node.axis(a), q[a]);
    }
    return {der[0] * val[1] * val[2], val[0] * der[1] * val[2], val[0] * val[1] * der[2]};
}

namespace detail {

// Polynomial of degree <= 2 in the local segment coordinate s.
using Quad = std::array<double, 3>;

// Coefficients (in u) of the cardinal B-spline on piece 0, 1, 2.
inline Quad piece_coeffs(int piece) {
    switch (piece) {
        case 0: return {1.125, 1.5, 0.5};
        case 1: return {0.75, 0.0, -1.0};
        default: return {1.125, -1.5, 0.5};
    }
}

// Restriction of basis b (or its derivative) to a segment starting at s0,
// expressed as a polynomial in s = t - s0.
inline Quad local_poly(const Basis1D& b, double s0, double mid, bool derivative) {
    const double w = b.width();
    const double c = b.center();
    const double um = (mid - c) / w;
    const int piece = um < -0.5 ? 0 : (um < 0.5 ? 1 : 2);
    const Quad a = piece_coeffs(piece);
    const double u0 = (s0 - c) / w;
    if (!derivative) {
        return {a[0] + a[1] * u0 + a[2] * u0 * u0, (a[1] + 2.0 * a[2] * u0) / w, a[2] / (w * w)};
    }
    // d/dt = (1/w) d/du
    return {(a[1] + 2.0 * a[2] * u0) / w, 2.0 * a[2] / (w * w), 0.0};
}

}  // namespace detail

/// Exact integral over the real line of the product selected by `mode`:
/// ValVal = a b, DerDer = a' b', DerVal = a' b.
inline double inner_1d(const Basis1D& a, const Basis1D& b, InnerMode mode) {
    const double lo = std::max(a.support_lo(), b.support_lo());
    const double hi = std::min(a.support_hi(), b.support_hi());
    if (!(lo < hi)) return 0.0;

    std::array<double, 10> bp{};
    std::size_t nbp = 0;
    for (const Basis1D* basis : {&a, &b}) {
        const double c = basis->center();
        const double w = basis->width();
        for (double k : {-1.5, -0.5, 0.5, 1.5}) {
            const double t = c + k * w;
            if (t > lo && t < hi) bp[nbp++] = t;
        }
    }
    bp[nbp++] = lo;
    bp[nbp++] = hi;
    std::sort(bp.begin(), bp.begin() + static_cast<std::ptrdiff_t>(nbp));

    const bool der_a = mode != InnerMode::ValVal;
    const bool der_b = mode == InnerMode::DerDer;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < nbp; ++i) {
        const double s0 = bp[i];
        const double len = bp[i + 1] - s0;
        if (len <= 0.0) continue;
        const double mid = s0 + 0.5 * len;
        const auto pa = detail::local_poly(a, s0, mid, der_a);
        const auto pb = detail::local_poly(b, s0, mid, der_b);
        // integral of the product over [0, len]
        double prod[5] = {0, 0, 0, 0, 0};
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) prod[p + q] += pa[static_cast<std::size_t>(p)] * pb[static_cast<std::size_t>(q)];
        double seg = 0.0;
        double lp = len;
        for (int k = 0; k < 5; ++k) {
            seg += prod[k] * lp / (k + 1);
            lp *= len;
        }
        total += seg;
    }
    return total;
}

/// Cache of 1D inner products. Integrals are translation invariant on the
/// dyadic grid, so they depend only on the two depths and the offset of the
/// finer basis relative to the coarser one.
class InnerProductTable {
public:
    struct Entry {
        double val_val = 0.0;
        double der_der = 0.0;
        double der_val = 0.0;  // integral of a' b
        double val_der = 0.0;  // integral of a b'
    };

    explicit InnerProductTable(int max_depth) : max_depth_(max_depth) {
        tables_.resize(static_cast<std::size_t>((max_depth + 1) * (max_depth + 1)));
        for (int da = 0; da <= max_depth; ++da)
            for (int db = da; db <= max_depth; ++db) build(da, db);
    }

    // Integrals between a (any depth) and b (any depth) along one axis.
    Entry get(int depth_a, Index off_a, int depth_b, Index off_b) const {
        if (depth_a <= depth_b) return lookup(depth_a, off_a, depth_b, off_b);
        Entry e = lookup(depth_b, off_b, depth_a, off_a);
        std::swap(e.der_val, e.val_der);
        return e;
    }

    // Offsets of depth-db bases whose support overlaps the depth-da basis at off_a.
    static std::pair<Index, Index> overlap_range(int depth_a, Index off_a, int depth_b) {
        if (depth_a <= depth_b) {
            const Index scale = Index{1} << (depth_b - depth_a);
            return {off_a * scale + rel_min(depth_b - depth_a), off_a * scale + rel_max(depth_b - depth_a)};
        }
        // b coarser than a: off_a = off_b * scale + rel, rel in [rel_min, rel_max]
        const Index scale = Index{1} << (depth_a - depth_b);
        const int delta = depth_a - depth_b;
        return {-floor_div(rel_max(delta) - off_a, scale), floor_div(off_a - rel_min(delta), scale)};
    }

private:
    // Overlap requires |rel + 1/2 - 2^delta/2| < 3/2 (2^delta + 1).
    static Index rel_min(int delta) { return -(Index{1} << delta) - 1; }
    static Index rel_max(int delta) { return 2 * (Index{1} << delta); }

    static Index floor_div(Index a, Index b) {
        Index q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
    }

    Entry lookup(int da, Index off_a, int db, Index off_b) const {
        const int delta = db - da;
        const Index rel = off_b - off_a * (Index{1} << delta);
        if (rel < rel_min(delta) || rel > rel_max(delta)) return {};
        const auto& tab = tables_[static_cast<std::size_t>(da * (max_depth_ + 1) + db)];
        return tab[static_cast<std::size_t>(rel - rel_min(delta))];
    }

    void build(int da, int db) {
        const int delta = db - da;
        auto& tab = tables_[static_cast<std::size_t>(da * (max_depth_ + 1) + db)];
        tab.resize(static_cast<std::size_t>(rel_max(delta) - rel_min(delta) + 1));
        const Basis1D a{da, 0};
        if (delta == 0) {
            // Same-depth integrals are built from the non-negative offsets and
            // mirrored, so A_ij and A_ji come out bitwise identical.
            for (Index rel = 0; rel <= rel_max(0); ++rel) {
                const Basis1D b{db, rel};
                Entry e;
                e.val_val = inner_1d(a, b, InnerMode::ValVal);
                e.der_der = inner_1d(a, b, InnerMode::DerDer);
                e.der_val = inner_1d(a, b, InnerMode::DerVal);
                e.val_der = -e.der_val;
                tab[static_cast<std::size_t>(rel - rel_min(0))] = e;
                Entry m = e;
                m.der_val = -e.der_val;
                m.val_der = e.der_val;
                tab[static_cast<std::size_t>(-rel - rel_min(0))] = m;
            }
            return;
        }
        for (Index rel = rel_min(delta); rel <= rel_max(delta); ++rel) {
            const Basis1D b{db, rel};
            Entry& e = tab[static_cast<std::size_t>(rel - rel_min(delta))];
            e.val_val = inner_1d(a, b, InnerMode::ValVal);
            e.der_der = inner_1d(a, b, InnerMode::DerDer);
            e.der_val = inner_1d(a, b, InnerMode::DerVal);
            e.val_der = inner_1d(b, a, InnerMode::DerVal);
        }
    }

    int max_depth_;
    std::vector<std::vector<Entry>> tables_;
};

}  // namespace isorient
