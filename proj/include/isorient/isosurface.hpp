#pragma once

#include "isorient/octree.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace isorient {

/// Regular samples of a scalar field over the unit cube, x fastest.
struct ScalarGrid {
    std::array<Index, 3> resolution{2, 2, 2};
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::vector<double> values;

    std::size_t index(Index x, Index y, Index z) const {
        return static_cast<std::size_t>((z * resolution[1] + y) * resolution[0] + x);
    }
    double at(Index x, Index y, Index z) const { return values[index(x, y, z)]; }
    Vec3 position(Index x, Index y, Index z) const {
        return origin + spacing * Vec3(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
    }

    // Header `nx ny nz ox oy oz s`, then one value per line.
    void write(std::ostream& os) const {
        os.precision(17);
        os << resolution[0] << ' ' << resolution[1] << ' ' << resolution[2] << ' ' << origin[0] << ' ' << origin[1]
           << ' ' << origin[2] << ' ' << spacing << '\n';
        for (double v : values) os << v << '\n';
    }
};

struct TriangleMesh {
    Vec3List vertices;
    std::vector<std::array<Index, 3>> triangles;
};

/// chi(q) = sum_o x_o B_o(q), evaluated by gathering the covering bases.
inline double evaluate_field(const Octree& tree, const std::vector<double>& coeffs, const Vec3& q) {
    double s = 0.0;
    for (int d = 0; d <= tree.max_depth(); ++d) {
        std::array<Index, 3> c{};
        for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = static_cast<Index>(std::floor(std::ldexp(q[a], d)));
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    NodeCoord nc{d, {c[0] + dx, c[1] + dy, c[2] + dz}};
                    const Index j = tree.find(nc);
                    if (j >= 0) s += coeffs[static_cast<std::size_t>(j)] * eval_3d(nc, q);
                }
    }
    return s;
}

/// Samples chi on a resolution^3 lattice spanning [0,1]^3. Each node scatters
/// its basis over the lattice points inside its support.
inline ScalarGrid sample_field(const Octree& tree, const std::vector<double>& coeffs, Index resolution) {
    if (resolution < 2 || resolution > 512) throw InputError("grid resolution must lie in [2, 512]");
    if (coeffs.size() != tree.size()) throw InputError("coefficient count does not match the octree");
    ScalarGrid g;
    g.resolution = {resolution, resolution, resolution};
    g.spacing = 1.0 / static_cast<double>(resolution - 1);
    g.values.assign(static_cast<std::size_t>(resolution * resolution * resolution), 0.0);
    std::vector<double> wx, wy, wz;
    for (std::size_t j = 0; j < tree.size(); ++j) {
        const double coef = coeffs[j];
        if (coef == 0.0) continue;
        const NodeCoord& nc = tree.node(static_cast<Index>(j)).coord;
        std::array<std::pair<Index, Index>, 3> range;
        std::array<std::vector<double>*, 3> w{&wx, &wy, &wz};
        for (int a = 0; a < 3; ++a) {
            const Basis1D b = nc.axis(a);
            const Index lo = std::max<Index>(0, static_cast<Index>(std::floor(b.support_lo() / g.spacing)));
            const Index hi = std::min<Index>(resolution - 1, static_cast<Index>(std::ceil(b.support_hi() / g.spacing)));
            range[static_cast<std::size_t>(a)] = {lo, hi};
            auto& vec = *w[static_cast<std::size_t>(a)];
            vec.clear();
            for (Index k = lo; k <= hi; ++k) vec.push_back(eval_1d(b, static_cast<double>(k) * g.spacing));
        }
        for (Index z = range[2].first; z <= range[2].second; ++z) {
            const double vz = wz[static_cast<std::size_t>(z - range[2].first)];
            if (vz == 0.0) continue;
            for (Index y = range[1].first; y <= range[1].second; ++y) {
                const double vyz = vz * wy[static_cast<std::size_t>(y - range[1].first)];
                if (vyz == 0.0) continue;
                for (Index x = range[0].first; x <= range[0].second; ++x)
                    g.values[g.index(x, y, z)] += coef * vyz * wx[static_cast<std::size_t>(x - range[0].first)];
            }
        }
    }
    return g;
}

namespace detail {

// Triangle table for the 256 corner configurations, derived from face-local
// rules: on every face an entering edge is joined to the next exiting edge in
// counter-clockwise order, which separates the inside corners on ambiguous
// faces. Adjacent cubes see the same face corners, so the surface is closed.
class McTable {
public:
    // corner c sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1)
    static constexpr std::array<std::array<int, 2>, 12> kEdges{{{0, 1}, {2, 3}, {4, 5}, {6, 7},
                                                                 {0, 2}, {1, 3}, {4, 6}, {5, 7},
                                                                 {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

    static const McTable& instance() {
        static const McTable table;
        return table;
    }

    const std::vector<std::array<int, 3>>& triangles(int config) const {
        return tris_[static_cast<std::size_t>(config)];
    }

private:
    McTable() {
        std::array<std::array<int, 4>, 6> faces = face_cycles();
        for (int config = 0; config < 256; ++config) {
            auto inside = [&](int c) { return ((config >> c) & 1) != 0; };
            std::map<int, int> next;  // entry edge -> exit edge
            for (const auto& f : faces) {
                std::array<int, 4> entry{}, exit{};
                int ne = 0, nx = 0;
                std::array<int, 4> kind{};  // per face edge: 1 entry, 2 exit
                for (int k = 0; k < 4; ++k) {
                    const int a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 4)];
                    if (inside(a) == inside(b)) continue;
                    kind[static_cast<std::size_t>(k)] = inside(b) ? 1 : 2;
                }
                for (int k = 0; k < 4; ++k) {
                    if (kind[static_cast<std::size_t>(k)] == 1) entry[static_cast<std::size_t>(ne++)] = k;
                    if (kind[static_cast<std::size_t>(k)] == 2) exit[static_cast<std::size_t>(nx++)] = k;
                }
                (void)exit;
                for (int e = 0; e < ne; ++e) {
                    const int k0 = entry[static_cast<std::size_t>(e)];
                    for (int step = 1; step < 4; ++step) {
                        const int k1 = (k0 + step) % 4;
                        if (kind[static_cast<std::size_t>(k1)] == 2) {
                            next[edge_id(f, k0)] = edge_id(f, k1);
                            break;
                        }
                    }
                }
            }
            auto& out = tris_[static_cast<std::size_t>(config)];
            std::map<int, bool> used;
            for (const auto& [start, unused] : next) {
                (void)unused;
                if (used[start]) continue;
                std::vector<int> poly;
                int e = start;
                while (!used[e]) {
                    used[e] = true;
                    poly.push_back(e);
                    e = next.at(e);
                }
                const std::size_t apex = fan_apex(poly);
                const std::size_t m = poly.size();
                for (std::size_t k = 1; k + 1 < m; ++k)
                    out.push_back({poly[apex], poly[(apex + k) % m], poly[(apex + k + 1) % m]});
            }
        }
        // Orient so that triangle normals point from inside (above the isovalue)
        // to outside; decided on the single-corner configuration.
        const auto& t = tris_[1].front();
        const Vec3 n = (edge_mid(t[1]) - edge_mid(t[0])).cross(edge_mid(t[2]) - edge_mid(t[0]));
        if (n.dot(Vec3(1, 1, 1)) < 0.0)
            for (auto& list : tris_)
                for (auto& tri : list) std::swap(tri[1], tri[2]);
    }

    static Vec3 corner(int c) { return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}; }
    static Vec3 edge_mid(int e) {
        return 0.5 * (corner(kEdges[static_cast<std::size_t>(e)][0]) + corner(kEdges[static_cast<std::size_t>(e)][1]));
    }

    static bool on_common_face(int e0, int e1) {
        const auto& a = kEdges[static_cast<std::size_t>(e0)];
        const auto& b = kEdges[static_cast<std::size_t>(e1)];
        for (int m : {1, 2, 4}) {
            const int v = a[0] & m;
            if ((a[1] & m) == v && (b[0] & m) == v && (b[1] & m) == v) return true;
        }
        return false;
    }

    // First apex whose fan has no diagonal on a cube face.
    static std::size_t fan_apex(const std::vector<int>& poly) {
        const std::size_t m = poly.size();
        for (std::size_t apex = 0; apex < m; ++apex) {
            bool ok = true;
            for (std::size_t k = 2; k + 1 < m && ok; ++k) ok = !on_common_face(poly[apex], poly[(apex + k) % m]);
            if (ok) return apex;
        }
        throw std::logic_error("marching cubes: no valid fan apex");
    }

    static int edge_id(const std::array<int, 4>& f, int k) {
        const int a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 4)];
        for (int e = 0; e < 12; ++e) {
            const auto& ed = kEdges[static_cast<std::size_t>(e)];
            if ((ed[0] == a && ed[1] == b) || (ed[0] == b && ed[1] == a)) return e;
        }
        throw std::logic_error("marching cubes: face edge not found");
    }

    // Corners of each face, counter-clockwise seen from outside the cube.
    static std::array<std::array<int, 4>, 6> face_cycles() {
        std::array<std::array<int, 4>, 6> faces{};
        int fi = 0;
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side) {
                Vec3 normal = Vec3::Zero();
                normal[axis] = side ? 1.0 : -1.0;
                Vec3 u = Vec3::Zero(), v;
                u[(axis + 1) % 3] = 1.0;
                v = normal.cross(u);
                const Vec3 centre = Vec3::Constant(0.5) + 0.5 * normal;
                std::vector<std::pair<double, int>> ring;
                for (int c = 0; c < 8; ++c) {
                    if (((c >> axis) & 1) != side) continue;
                    const Vec3 d = corner(c) - centre;
                    ring.emplace_back(std::atan2(d.dot(v), d.dot(u)), c);
                }
                std::sort(ring.begin(), ring.end());
                for (int k = 0; k < 4; ++k) faces[static_cast<std::size_t>(fi)][static_cast<std::size_t>(k)] = ring[static_cast<std::size_t>(k)].second;
                ++fi;
            }
        return faces;
    }

    std::array<std::vector<std::array<int, 3>>, 256> tris_;
};

}  // namespace detail

/// Marching cubes with linear edge interpolation. Corners strictly above the
/// isovalue count as inside; vertices are shared through their lattice edge.
inline TriangleMesh marching_cubes(const ScalarGrid& g, double isovalue = 0.5) {
    const auto& table = detail::McTable::instance();
    TriangleMesh mesh;
    std::map<std::pair<std::size_t, int>, Index> vertex_of_edge;  // (lattice point, axis)
    const auto& rs = g.resolution;
    for (Index z = 0; z + 1 < rs[2]; ++z)
        for (Index y = 0; y + 1 < rs[1]; ++y)
            for (Index x = 0; x + 1 < rs[0]; ++x) {
                std::array<double, 8> v{};
                int config = 0;
                for (int c = 0; c < 8; ++c) {
                    v[static_cast<std::size_t>(c)] = g.at(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1));
                    if (v[static_cast<std::size_t>(c)] > isovalue) config |= 1 << c;
                }
                if (config == 0 || config == 255) continue;
                auto vertex = [&](int e) {
                    const auto& ed = detail::McTable::kEdges[static_cast<std::size_t>(e)];
                    const int a = ed[0], b = ed[1];
                    const int axis = (a ^ b) == 1 ? 0 : ((a ^ b) == 2 ? 1 : 2);
                    const Index ax = x + (a & 1), ay = y + ((a >> 1) & 1), az = z + ((a >> 2) & 1);
                    const auto key = std::make_pair(g.index(ax, ay, az), axis);
                    auto it = vertex_of_edge.find(key);
                    if (it != vertex_of_edge.end()) return it->second;
                    const double va = v[static_cast<std::size_t>(a)], vb = v[static_cast<std::size_t>(b)];
                    const double t = (isovalue - va) / (vb - va);
                    const Vec3 pa = g.position(ax, ay, az);
                    const Vec3 pb = g.position(x + (b & 1), y + ((b >> 1) & 1), z + ((b >> 2) & 1));
                    const auto id = static_cast<Index>(mesh.vertices.size());
                    mesh.vertices.push_back(pa + t * (pb - pa));
                    vertex_of_edge.emplace(key, id);
                    return id;
                };
                for (const auto& tri : table.triangles(config))
                    mesh.triangles.push_back({vertex(tri[0]), vertex(tri[1]), vertex(tri[2])});
            }
    return mesh;
}

inline Index euler_characteristic(const TriangleMesh& m) {
    std::map<std::pair<Index, Index>, int> edges;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            Index a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
            edges[{std::min(a, b), std::max(a, b)}]++;
        }
    return static_cast<Index>(m.vertices.size()) - static_cast<Index>(edges.size()) +
           static_cast<Index>(m.triangles.size());
}

// True when every edge is shared by exactly two triangles.
inline bool is_closed(const TriangleMesh& m) {
    std::map<std::pair<Index, Index>, int> edges;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            Index a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
            edges[{std::min(a, b), std::max(a, b)}]++;
        }
    return std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; });
}

/// Connected components of the triangle graph (vertices joined by triangles).
inline std::size_t connected_components(const TriangleMesh& m) {
    std::vector<Index> parent(m.vertices.size());
    std::iota(parent.begin(), parent.end(), Index{0});
    auto root = [&](Index a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    for (const auto& t : m.triangles)
        for (int k = 1; k < 3; ++k) {
            Index a = root(t[0]), b = root(t[static_cast<std::size_t>(k)]);
            if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        }
    std::vector<char> used(m.vertices.size(), 0);
    for (const auto& t : m.triangles) used[static_cast<std::size_t>(t[0])] = 1;
    std::size_t count = 0;
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        if (used[v] && root(static_cast<Index>(v)) == static_cast<Index>(v)) ++count;
    return count;
}

inline void write_mesh_ply(std::ostream& os, const TriangleMesh& m, double isovalue) {
    os << "ply\nformat ascii 1.0\ncomment isovalue " << isovalue << "\nelement vertex " << m.vertices.size()
       << "\nproperty float x\nproperty float y\nproperty float z\nelement face " << m.triangles.size()
       << "\nproperty list uchar int vertex_indices\nend_header\n";
    os.precision(9);
    for (const auto& v : m.vertices) os << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void write_mesh_obj(std::ostream& os, const TriangleMesh& m, double isovalue) {
    os << "# isovalue " << isovalue << '\n';
    os.precision(9);
    for (const auto& v : m.vertices) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const auto& t : m.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

}  // namespace isorient
