#pragma once

#include "isorient/knn_graph.hpp"
#include "isorient/octree.hpp"
#include "isorient/sparse.hpp"

#include <numeric>
#include <unordered_map>

namespace isorient {

struct DensityWeights {
    int depth = 0;
    std::vector<double> values;  // W(p_i) > 0
};

// Row ordering of the free (non-boundary) nodes.
struct FreeMap {
    std::vector<Index> node_to_free;  // -1 for boundary nodes
    std::vector<Index> free_to_node;

    std::size_t size() const { return free_to_node.size(); }
};

/// Sparse operators of the joint indicator/normal least-squares problem.
///   U  N x |O|     point evaluation, U_ij = B_j(p_i)
///   A  |O| x |O|   stiffness, <grad B_i, grad B_j>
///   B  |O| x 3N    divergence of the splatted field, b = B n
///   M  3N x 3N     local consistency quadratic, E_loc = n^T M n
/// After eliminate_boundary() the node dimension is the free-node count.
struct SystemOperators {
    SparseMatrix U, A, B, M;
    SparseMatrix Ut, Bt;  // cached transposes for row-parallel products
    FreeMap free_map;
    bool reduced = false;
    double alpha = 1e4;
    double beta = 1e-4;
    double gamma = 1e-4;

    Index num_points() const { return U.rows(); }
    Index node_dim() const { return A.rows(); }
    Index normal_dim() const { return M.rows(); }

    void cache_transposes() {
        Ut = U.transpose();
        Bt = B.transpose();
    }
};

namespace detail {

inline Index floor_index(double t, int depth) {
    return static_cast<Index>(std::floor(std::ldexp(t, depth)));
}

// Visits every existing node c with depth(c) <= depth(f) whose support
// overlaps that of f (same-depth nodes include f itself).
template <class Fn>
void for_each_coarser_overlap(const Octree& tree, const InnerProductTable& table, Index f, Fn&& fn) {
    const NodeCoord& fc = tree.node(f).coord;
    for (int d = 0; d <= fc.depth; ++d) {
        std::array<std::pair<Index, Index>, 3> range;
        for (int a = 0; a < 3; ++a)
            range[static_cast<std::size_t>(a)] =
                InnerProductTable::overlap_range(fc.depth, fc.offset[static_cast<std::size_t>(a)], d);
        std::array<InnerProductTable::Entry, 3> e{};
        for (Index x = range[0].first; x <= range[0].second; ++x) {
            e[0] = table.get(fc.depth, fc.offset[0], d, x);
            if (e[0].val_val == 0.0 && e[0].der_der == 0.0) continue;
            for (Index y = range[1].first; y <= range[1].second; ++y) {
                e[1] = table.get(fc.depth, fc.offset[1], d, y);
                if (e[1].val_val == 0.0 && e[1].der_der == 0.0) continue;
                for (Index z = range[2].first; z <= range[2].second; ++z) {
                    const Index c = tree.find({d, {x, y, z}});
                    if (c < 0) continue;
                    e[2] = table.get(fc.depth, fc.offset[2], d, z);
                    fn(c, e);
                }
            }
        }
    }
}

inline SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<std::size_t>(a.rows()));
    for (Index r = 0; r < a.rows(); ++r) {
        auto& row = rows[static_cast<std::size_t>(r)];
        for (const SparseMatrix* m : {&a, &b}) {
            auto c = m->row_cols(r);
            auto v = m->row_values(r);
            for (std::size_t k = 0; k < c.size(); ++k) row.emplace_back(c[k], v[k]);
        }
    }
    return SparseMatrix::from_rows(a.rows(), a.cols(), std::move(rows));
}

}  // namespace detail

/// Per-sample density: every sample spreads unit mass onto the 27 depth-d_w
/// nodes around it with the quadratic B-spline weights, and W(p_i) is that
/// node mass field interpolated back at p_i with the same weights.
inline DensityWeights compute_density(const Vec3List& points, int density_depth) {
    if (density_depth < 0 || density_depth > Octree::kMaxSupportedDepth)
        throw InputError("density depth out of range");
    auto key = [](const std::array<Index, 3>& o) {
        return (static_cast<std::uint64_t>(o[0] + 2) << 40) | (static_cast<std::uint64_t>(o[1] + 2) << 20) |
               static_cast<std::uint64_t>(o[2] + 2);
    };
    auto stencil = [&](const Vec3& p, auto&& fn) {
        std::array<Index, 3> c{};
        for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = detail::floor_index(p[a], density_depth);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    NodeCoord nc{density_depth, {c[0] + dx, c[1] + dy, c[2] + dz}};
                    const double w = eval_3d(nc, p);
                    if (w != 0.0) fn(key(nc.offset), w);
                }
    };
    std::unordered_map<std::uint64_t, double> mass;
    for (const auto& p : points) stencil(p, [&](std::uint64_t k, double w) { mass[k] += w; });
    DensityWeights dw;
    dw.depth = density_depth;
    dw.values.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double s = 0.0;
        stencil(points[i], [&](std::uint64_t k, double w) { s += w * mass.at(k); });
        dw.values[i] = s;
    }
    return dw;
}

inline DensityWeights compute_density(const Vec3List& points, const Octree& tree, int density_depth) {
    (void)tree;
    return compute_density(points, density_depth);
}

enum class SplatScale { Raw, Area };

/// Constant that turns 1/W into a per-sample surface area in units of the
/// depth-D cell volume. W counts samples per depth-d_w kernel footprint,
/// whose planar cross-section is (11/20) w_dw^2; with this factor a field of
/// unit normals makes chi jump by one across the surface.
inline double area_splat_scale(int depth, int density_depth) {
    const double wd = bspline::width_at(density_depth), w = bspline::width_at(depth);
    return 11.0 / 20.0 * wd * wd / (w * w * w);
}

/// Splat operator S (3|O| x 3N): the vector field coefficients are v = S n.
/// Sample i contributes scale * B_o(p_i) / W(p_i) to each of the 27 depth-D
/// nodes o around its cell, identically for the three components.
inline SparseMatrix assemble_splat(const Vec3List& points, const Octree& tree, const DensityWeights& weights,
                                   double scale = 1.0) {
    const int depth = tree.max_depth();
    const Index res = Index{1} << depth;
    const auto n = static_cast<Index>(points.size());
    std::vector<std::vector<std::pair<Index, double>>> cols(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        const NodeCoord& home = tree.node(tree.point_nodes()[static_cast<std::size_t>(i)]).coord;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    NodeCoord nc{depth, {home.offset[0] + dx, home.offset[1] + dy, home.offset[2] + dz}};
                    bool inside = true;
                    for (auto o : nc.offset) inside = inside && o >= 0 && o < res;
                    if (!inside) continue;
                    const Index o = tree.find(nc);
                    if (o < 0)
                        throw NumericalError("splat: missing stencil node for point " + std::to_string(i));
                    const double a = eval_3d(nc, p);
                    if (a != 0.0)
                        cols[static_cast<std::size_t>(i)].emplace_back(o, scale * a / weights.values[static_cast<std::size_t>(i)]);
                }
    }
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(n) * 81);
    for (Index i = 0; i < n; ++i)
        for (const auto& [o, v] : cols[static_cast<std::size_t>(i)])
            for (Index a = 0; a < 3; ++a) trip.push_back({3 * o + a, 3 * i + a, v});
    return SparseMatrix::from_triplets(3 * static_cast<Index>(tree.size()), 3 * n, std::move(trip));
}

/// B = G S assembled per sample without forming G. Both factors are tensor
/// products, so column 3i+a of B is scale/W(p_i) times a product of three
/// one-dimensional sums over the sample's stencil offsets.
inline SparseMatrix assemble_splat_divergence(const Vec3List& points, const Octree& tree,
                                              const DensityWeights& weights, double scale = 1.0) {
    const int depth = tree.max_depth();
    const Index res = Index{1} << depth;
    const InnerProductTable table(depth);
    const auto n = static_cast<Index>(points.size());
    std::vector<std::vector<std::pair<Index, double>>> cols(static_cast<std::size_t>(3 * n));
#pragma omp parallel for schedule(dynamic, 64)
    for (Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        const NodeCoord& home = tree.node(tree.point_nodes()[static_cast<std::size_t>(i)]).coord;
        const double s = scale / weights.values[static_cast<std::size_t>(i)];
        // stencil offsets and their spline weights per axis
        std::array<std::vector<std::pair<Index, double>>, 3> st;
        for (int a = 0; a < 3; ++a)
            for (Index d = -1; d <= 1; ++d) {
                const Index o = home.offset[static_cast<std::size_t>(a)] + d;
                if (o < 0 || o >= res) continue;
                const double b = eval_1d({depth, o}, p[a]);
                if (b != 0.0) st[static_cast<std::size_t>(a)].emplace_back(o, b);
            }
        if (st[0].empty() || st[1].empty() || st[2].empty()) continue;
        for (int d = 0; d <= depth; ++d) {
            std::array<Index, 3> lo{}, hi{};
            std::array<std::vector<double>, 3> val, der;
            for (int a = 0; a < 3; ++a) {
                const auto sa = static_cast<std::size_t>(a);
                lo[sa] = InnerProductTable::overlap_range(depth, st[sa].front().first, d).first;
                hi[sa] = InnerProductTable::overlap_range(depth, st[sa].back().first, d).second;
                lo[sa] = std::max<Index>(lo[sa], 0);
                hi[sa] = std::min<Index>(hi[sa], (Index{1} << d) - 1);
                val[sa].assign(static_cast<std::size_t>(std::max<Index>(hi[sa] - lo[sa] + 1, 0)), 0.0);
                der[sa].assign(val[sa].size(), 0.0);
                for (Index c = lo[sa]; c <= hi[sa]; ++c)
                    for (const auto& [o, b] : st[sa]) {
                        const auto e = table.get(d, c, depth, o);
                        val[sa][static_cast<std::size_t>(c - lo[sa])] += b * e.val_val;
                        der[sa][static_cast<std::size_t>(c - lo[sa])] += b * e.der_val;
                    }
            }
            for (Index x = lo[0]; x <= hi[0]; ++x)
                for (Index y = lo[1]; y <= hi[1]; ++y)
                    for (Index z = lo[2]; z <= hi[2]; ++z) {
                        const auto kx = static_cast<std::size_t>(x - lo[0]), ky = static_cast<std::size_t>(y - lo[1]),
                                   kz = static_cast<std::size_t>(z - lo[2]);
                        const double gx = der[0][kx] * val[1][ky] * val[2][kz];
                        const double gy = val[0][kx] * der[1][ky] * val[2][kz];
                        const double gz = val[0][kx] * val[1][ky] * der[2][kz];
                        if (gx == 0.0 && gy == 0.0 && gz == 0.0) continue;
                        const Index node = tree.find({d, {x, y, z}});
                        if (node < 0) continue;
                        cols[static_cast<std::size_t>(3 * i + 0)].emplace_back(node, s * gx);
                        cols[static_cast<std::size_t>(3 * i + 1)].emplace_back(node, s * gy);
                        cols[static_cast<std::size_t>(3 * i + 2)].emplace_back(node, s * gz);
                    }
        }
    }
    return SparseMatrix::from_rows(3 * n, static_cast<Index>(tree.size()), std::move(cols)).transpose();
}

/// Stiffness matrix A_ij = <grad B_i, grad B_j>. Each row collects coarser and
/// same-depth partners directly; finer partners arrive through the transpose
/// of the strictly-coarser part.
inline SparseMatrix assemble_stiffness(const Octree& tree) {
    const InnerProductTable table(tree.max_depth());
    const auto n = static_cast<Index>(tree.size());
    std::vector<std::vector<std::pair<Index, double>>> own(static_cast<std::size_t>(n)), coarse(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 64)
    for (Index f = 0; f < n; ++f) {
        const int df = tree.node(f).coord.depth;
        detail::for_each_coarser_overlap(tree, table, f, [&](Index c, const auto& e) {
            const double v = e[0].der_der * e[1].val_val * e[2].val_val + e[0].val_val * e[1].der_der * e[2].val_val +
                             e[0].val_val * e[1].val_val * e[2].der_der;
            own[static_cast<std::size_t>(f)].emplace_back(c, v);
            if (tree.node(c).coord.depth < df) coarse[static_cast<std::size_t>(f)].emplace_back(c, v);
        });
    }
    const auto lower = SparseMatrix::from_rows(n, n, std::move(own));
    const auto strict = SparseMatrix::from_rows(n, n, std::move(coarse));
    return detail::add(lower, strict.transpose());
}

/// Divergence operator G (|O| x 3|O|): G_{i,3o+a} = <d_a B_i, B_o>. When
/// column_depth >= 0 only columns of nodes at that depth are built; the splat
/// operator only ever touches depth-D columns.
inline SparseMatrix assemble_divergence(const Octree& tree, int column_depth = -1) {
    const InnerProductTable table(tree.max_depth());
    const auto n = static_cast<Index>(tree.size());
    // own: row f, column 3c+a, <d_a B_f, B_c>, for depth(c) <= depth(f)
    // mirrored: row 3f+a, column c, <d_a B_c, B_f>, for depth(c) < depth(f)
    std::vector<std::vector<std::pair<Index, double>>> own(static_cast<std::size_t>(n));
    std::vector<std::vector<std::pair<Index, double>>> mirrored(static_cast<std::size_t>(3 * n));
#pragma omp parallel for schedule(dynamic, 64)
    for (Index f = 0; f < n; ++f) {
        const int df = tree.node(f).coord.depth;
        const bool f_is_column = column_depth < 0 || df == column_depth;
        detail::for_each_coarser_overlap(tree, table, f, [&](Index c, const auto& e) {
            const int dc = tree.node(c).coord.depth;
            if (column_depth < 0 || dc == column_depth) {
                own[static_cast<std::size_t>(f)].emplace_back(3 * c + 0, e[0].der_val * e[1].val_val * e[2].val_val);
                own[static_cast<std::size_t>(f)].emplace_back(3 * c + 1, e[0].val_val * e[1].der_val * e[2].val_val);
                own[static_cast<std::size_t>(f)].emplace_back(3 * c + 2, e[0].val_val * e[1].val_val * e[2].der_val);
            }
            if (dc < df && f_is_column) {
                mirrored[static_cast<std::size_t>(3 * f + 0)].emplace_back(c, e[0].val_der * e[1].val_val * e[2].val_val);
                mirrored[static_cast<std::size_t>(3 * f + 1)].emplace_back(c, e[0].val_val * e[1].val_der * e[2].val_val);
                mirrored[static_cast<std::size_t>(3 * f + 2)].emplace_back(c, e[0].val_val * e[1].val_val * e[2].val_der);
            }
        });
    }
    const auto a = SparseMatrix::from_rows(n, 3 * n, std::move(own));
    const auto b = SparseMatrix::from_rows(3 * n, n, std::move(mirrored));
    return detail::add(a, b.transpose());
}

/// Point evaluation U_ij = B_j(p_i) over every existing node of every depth.
inline SparseMatrix assemble_point_eval(const Vec3List& points, const Octree& tree) {
    const auto n = static_cast<Index>(points.size());
    std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        auto& row = rows[static_cast<std::size_t>(i)];
        for (int d = 0; d <= tree.max_depth(); ++d) {
            std::array<Index, 3> c{};
            for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = detail::floor_index(p[a], d);
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz) {
                        NodeCoord nc{d, {c[0] + dx, c[1] + dy, c[2] + dz}};
                        const Index j = tree.find(nc);
                        if (j < 0) continue;
                        const double v = eval_3d(nc, p);
                        if (v != 0.0) row.emplace_back(j, v);
                    }
        }
    }
    return SparseMatrix::from_rows(n, static_cast<Index>(tree.size()), std::move(rows));
}

/// Edge weight exp(-|p_i - p_j| / rho^2); with `squared` the distance is squared.
inline double consistency_weight(double dist, double rho, bool squared) {
    return std::exp(-(squared ? dist * dist : dist) / (rho * rho));
}

/// Local consistency quadratic M with n^T M n = E_D(n) + E_COD(n), where
///   E_D   = 1/2 sum_i sum_{j in N(i)} w_ij |n_i - n_j|^2
///   E_COD = sum_i sum_{j in N(i)} w_ij ((n_i + n_j) . e_ij)^2
/// Both sums run over ordered pairs, so every undirected edge counts twice.
inline SparseMatrix assemble_consistency(const Vec3List& points, const KnnGraph& graph, bool squared_distance = false) {
    const auto n = static_cast<Index>(points.size());
    std::vector<Triplet> trip;
    trip.reserve(graph.edges.size() * 36 + static_cast<std::size_t>(n));
    for (const auto& [i, j] : graph.edges) {
        const Vec3 d = points[static_cast<std::size_t>(j)] - points[static_cast<std::size_t>(i)];
        const double len = d.norm();
        if (!(len > 0.0))
            throw InputError("consistency: coincident points " + std::to_string(i) + " and " + std::to_string(j));
        const double w = consistency_weight(len, graph.rho, squared_distance);
        const Vec3 e = d / len;
        for (int a = 0; a < 3; ++a) {
            trip.push_back({3 * i + a, 3 * i + a, w});
            trip.push_back({3 * j + a, 3 * j + a, w});
            trip.push_back({3 * i + a, 3 * j + a, -w});
            trip.push_back({3 * j + a, 3 * i + a, -w});
            for (int b = 0; b < 3; ++b) {
                const double v = 2.0 * w * e[a] * e[b];
                trip.push_back({3 * i + a, 3 * i + b, v});
                trip.push_back({3 * j + a, 3 * j + b, v});
                trip.push_back({3 * i + a, 3 * j + b, v});
                trip.push_back({3 * j + a, 3 * i + b, v});
            }
        }
    }
    return SparseMatrix::from_triplets(3 * n, 3 * n, std::move(trip));
}

/// Drops the boundary nodes: columns of U, rows and columns of A, rows of B.
inline SystemOperators eliminate_boundary(SystemOperators&& full, const Octree& tree) {
    if (full.reduced) throw InputError("operators are already reduced");
    SystemOperators r;
    r.alpha = full.alpha;
    r.beta = full.beta;
    r.gamma = full.gamma;
    FreeMap& fm = r.free_map;
    fm.node_to_free.assign(tree.size(), -1);
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (tree.nodes()[i].boundary) continue;
        fm.node_to_free[i] = static_cast<Index>(fm.free_to_node.size());
        fm.free_to_node.push_back(static_cast<Index>(i));
    }
    if (fm.free_to_node.empty()) throw InputError("every octree node touches the boundary; increase the depth");
    const auto nf = static_cast<Index>(fm.size());
    const auto npts = full.U.rows();
    std::vector<Index> identity_pts(static_cast<std::size_t>(npts));
    std::iota(identity_pts.begin(), identity_pts.end(), Index{0});
    std::vector<Index> identity_n(static_cast<std::size_t>(full.B.cols()));
    std::iota(identity_n.begin(), identity_n.end(), Index{0});
    r.U = full.U.reduce(identity_pts, npts, fm.node_to_free, nf);
    full.U = {};
    full.Ut = {};
    r.A = full.A.reduce(fm.node_to_free, nf, fm.node_to_free, nf);
    full.A = {};
    r.B = full.B.reduce(fm.node_to_free, nf, identity_n, full.B.cols());
    full.B = {};
    full.Bt = {};
    r.M = std::move(full.M);
    r.reduced = true;
    r.cache_transposes();
    return r;
}

inline SystemOperators eliminate_boundary(const SystemOperators& full, const Octree& tree) {
    return eliminate_boundary(SystemOperators(full), tree);
}

struct AssemblyOptions {
    double alpha = 1e4;
    double beta = 1e-4;
    double gamma = 1e-4;
    int density_depth = -1;  // -1: max depth - 2
    bool wij_squared = false;
    SplatScale splat_scale = SplatScale::Raw;
};

struct AssemblyStats {
    DensityWeights density;
    double splat_scale = 1.0;
};

/// Builds U, A, B and M for a normalized point set.
inline SystemOperators assemble_operators(const Vec3List& points, const Octree& tree, const KnnGraph& graph,
                                          const AssemblyOptions& opt, AssemblyStats* stats = nullptr) {
    const int dw = opt.density_depth >= 0 ? opt.density_depth : std::max(0, tree.max_depth() - 2);
    AssemblyStats local;
    AssemblyStats& st = stats ? *stats : local;
    st.density = compute_density(points, tree, dw);
    st.splat_scale = opt.splat_scale == SplatScale::Area ? area_splat_scale(tree.max_depth(), dw) : 1.0;
    SystemOperators ops;
    ops.alpha = opt.alpha;
    ops.beta = opt.beta;
    ops.gamma = opt.gamma;
    ops.B = assemble_splat_divergence(points, tree, st.density, st.splat_scale);
    ops.A = assemble_stiffness(tree);
    ops.U = assemble_point_eval(points, tree);
    ops.M = assemble_consistency(points, graph, opt.wij_squared);
    return ops;
}

struct AssembledSystem {
    SystemOperators full;     // unreduced U, A, B, M
    SystemOperators reduced;  // after boundary elimination
    AssemblyStats stats;
};

/// Builds every operator for a normalized point set and eliminates the boundary.
inline AssembledSystem assemble_system(const Vec3List& points, const Octree& tree, const KnnGraph& graph,
                                       const AssemblyOptions& opt) {
    AssembledSystem sys;
    sys.full = assemble_operators(points, tree, graph, opt, &sys.stats);
    sys.reduced = eliminate_boundary(sys.full, tree);
    return sys;
}

}  // namespace isorient
