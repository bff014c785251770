#pragma once

#include "isorient/common.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string_view>

namespace isorient {

// Uniform scale followed by translation: y = scale * x + translation.
struct Transform {
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * p + translation; }
    Vec3 inverse(const Vec3& q) const { return (q - translation) / scale; }
    // this after other
    Transform compose(const Transform& other) const {
        return {scale * other.scale, scale * other.translation + translation};
    }
};

struct PointCloud {
    Vec3List positions;
    std::optional<Vec3List> gt_normals;
    Transform transform;  // world -> normalized; identity until normalize()

    std::size_t size() const { return positions.size(); }
    bool has_normals() const { return gt_normals.has_value(); }

    PointCloud subset(const std::vector<Index>& indices) const {
        PointCloud out;
        out.transform = transform;
        out.positions.reserve(indices.size());
        for (Index i : indices) out.positions.push_back(positions[static_cast<std::size_t>(i)]);
        if (gt_normals) {
            out.gt_normals.emplace();
            for (Index i : indices) out.gt_normals->push_back((*gt_normals)[static_cast<std::size_t>(i)]);
        }
        return out;
    }
};

enum class CloudFormat { Xyz, Ply };

inline CloudFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".ply" ? CloudFormat::Ply : CloudFormat::Xyz;
}

namespace detail {

inline void renormalize(Vec3List& normals, const std::string& source) {
    for (std::size_t i = 0; i < normals.size(); ++i) {
        const double len = normals[i].norm();
        if (!(len > 0.0) || !std::isfinite(len))
            throw InputError(source + ": zero-length normal at point " + std::to_string(i));
        normals[i] /= len;
    }
}

inline bool parse_double(std::string_view tok, double& out) {
    std::string s(tok);
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end != s.c_str() && *end == '\0' && std::isfinite(out);
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline PointCloud load_xyz(std::istream& in, const std::string& name) {
    PointCloud cloud;
    Vec3List normals;
    std::optional<bool> with_normals;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 3 && toks.size() != 6)
            throw InputError(name + ":" + std::to_string(lineno) + ": expected 3 or 6 columns, got " +
                             std::to_string(toks.size()));
        double v[6];
        for (std::size_t k = 0; k < toks.size(); ++k)
            if (!parse_double(toks[k], v[k]))
                throw InputError(name + ":" + std::to_string(lineno) + ": non-numeric token '" + toks[k] + "'");
        const bool has_n = toks.size() == 6;
        if (!with_normals) with_normals = has_n;
        if (*with_normals != has_n)
            throw InputError(name + ":" + std::to_string(lineno) + ": inconsistent column count");
        cloud.positions.emplace_back(v[0], v[1], v[2]);
        if (has_n) normals.emplace_back(v[3], v[4], v[5]);
    }
    if (cloud.positions.empty()) throw InputError(name + ": empty cloud");
    if (with_normals && *with_normals) {
        renormalize(normals, name);
        cloud.gt_normals = std::move(normals);
    }
    return cloud;
}

inline PointCloud load_ply(std::istream& in, const std::string& name) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    auto fail = [&](const std::string& msg) { throw InputError(name + ":" + std::to_string(lineno) + ": " + msg); };

    if (!next_line() || line != "ply") fail("missing ply magic");
    std::size_t vertex_count = 0;
    bool in_vertex = false;
    bool seen_vertex = false;
    std::vector<std::string> props;
    std::size_t elements_before_vertex = 0;
    while (true) {
        if (!next_line()) fail("unexpected end of header");
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "end_header") break;
        if (toks[0] == "format") {
            if (toks.size() < 2 || toks[1] != "ascii") fail("only ascii ply is supported");
        } else if (toks[0] == "element") {
            if (toks.size() != 3) fail("malformed element line");
            in_vertex = toks[1] == "vertex";
            if (in_vertex) {
                double count = 0;
                if (!parse_double(toks[2], count) || count < 0) fail("bad vertex count");
                vertex_count = static_cast<std::size_t>(count);
                seen_vertex = true;
            } else if (!seen_vertex) {
                ++elements_before_vertex;
            }
        } else if (toks[0] == "property") {
            if (in_vertex) {
                if (toks.size() < 3) fail("malformed property line");
                if (toks[1] == "list") fail("list properties on vertex are not supported");
                props.push_back(toks.back());
            }
        } else if (toks[0] != "comment" && toks[0] != "obj_info") {
            fail("unknown header keyword '" + toks[0] + "'");
        }
    }
    if (!seen_vertex) fail("no vertex element");
    if (elements_before_vertex > 0) fail("vertex must be the first element");
    auto find = [&](const char* p) -> int {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i] == p) return static_cast<int>(i);
        return -1;
    };
    const int ix = find("x"), iy = find("y"), iz = find("z");
    if (ix < 0 || iy < 0 || iz < 0) fail("vertex element lacks x, y, z");
    const int inx = find("nx"), iny = find("ny"), inz = find("nz");
    const bool has_n = inx >= 0 && iny >= 0 && inz >= 0;

    PointCloud cloud;
    Vec3List normals;
    cloud.positions.reserve(vertex_count);
    std::vector<double> vals(props.size());
    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (!next_line()) fail("unexpected end of vertex data");
        auto toks = split_ws(line);
        if (toks.size() != props.size()) fail("expected " + std::to_string(props.size()) + " values");
        for (std::size_t k = 0; k < toks.size(); ++k)
            if (!parse_double(toks[k], vals[k])) fail("non-numeric token '" + toks[k] + "'");
        auto at = [&](int i) { return vals[static_cast<std::size_t>(i)]; };
        cloud.positions.emplace_back(at(ix), at(iy), at(iz));
        if (has_n) normals.emplace_back(at(inx), at(iny), at(inz));
    }
    if (cloud.positions.empty()) throw InputError(name + ": empty cloud");
    if (has_n) {
        renormalize(normals, name);
        cloud.gt_normals = std::move(normals);
    }
    return cloud;
}

}  // namespace detail

/// Reads a cloud in world units. Normals present in the file become
/// gt_normals, rescaled to unit length.
inline PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return format == CloudFormat::Ply ? detail::load_ply(in, path.string()) : detail::load_xyz(in, path.string());
}

inline PointCloud load_cloud(const std::filesystem::path& path) { return load_cloud(path, format_from_path(path)); }

inline void write_ply(std::ostream& os, const Vec3List& positions, const Vec3List* normals) {
    os << "ply\nformat ascii 1.0\nelement vertex " << positions.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (normals) os << "property float nx\nproperty float ny\nproperty float nz\n";
    os << "end_header\n";
    os << std::setprecision(9);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const auto& p = positions[i];
        os << p[0] << ' ' << p[1] << ' ' << p[2];
        if (normals) {
            const auto& n = (*normals)[i];
            os << ' ' << n[0] << ' ' << n[1] << ' ' << n[2];
        }
        os << '\n';
    }
}

inline void write_xyz(std::ostream& os, const Vec3List& positions, const Vec3List* normals) {
    os << std::setprecision(9);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const auto& p = positions[i];
        os << p[0] << ' ' << p[1] << ' ' << p[2];
        if (normals) {
            const auto& n = (*normals)[i];
            os << ' ' << n[0] << ' ' << n[1] << ' ' << n[2];
        }
        os << '\n';
    }
}

inline void save_cloud(const std::filesystem::path& path, const Vec3List& positions, const Vec3List* normals) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    if (format_from_path(path) == CloudFormat::Ply)
        write_ply(out, positions, normals);
    else
        write_xyz(out, positions, normals);
}

/// Fits the cloud into [0,1]^3: the tight bounding box is scaled by
/// 1 / (padding * max extent) and centred at (1/2, 1/2, 1/2). The new
/// transform is composed onto the one already recorded.
inline PointCloud normalize(const PointCloud& cloud, double padding = 1.25) {
    if (cloud.positions.empty()) throw InputError("normalize: empty cloud");
    if (!(padding > 1.0)) throw InputError("normalize: padding must exceed 1");
    Vec3 lo = cloud.positions.front(), hi = lo;
    for (const auto& p : cloud.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0)) throw InputError("normalize: degenerate cloud (all points identical)");
    Transform t;
    t.scale = 1.0 / (padding * extent);
    t.translation = Vec3::Constant(0.5) - t.scale * 0.5 * (lo + hi);
    PointCloud out;
    out.positions.reserve(cloud.size());
    for (const auto& p : cloud.positions) out.positions.push_back(t.apply(p));
    out.gt_normals = cloud.gt_normals;
    out.transform = t.compose(cloud.transform);
    return out;
}

inline Vec3List to_world(const PointCloud& cloud) {
    Vec3List out;
    out.reserve(cloud.size());
    for (const auto& p : cloud.positions) out.push_back(cloud.transform.inverse(p));
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class ShapeKind { Sphere, NestedSpheres, Torus, ThinSlab };

struct ShapeParams {
    double radius = 1.0;
    std::vector<double> radii{0.5, 0.75, 1.0};
    double major_radius = 1.0;
    double minor_radius = 0.3;
    double slab_size = 1.0;
    double thickness = 0.1;
};

namespace detail {

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    while (true) {
        Vec3 v(g(rng), g(rng), g(rng));
        const double len = v.norm();
        if (len > 1e-12) return v / len;
    }
}

// Largest-remainder split of `total` proportionally to `weights`.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        rem.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[rem[k % rem.size()].second];
    return counts;
}

}  // namespace detail

/// Uniform-area surface samples with analytic outward normals.
inline PointCloud synth_shape(ShapeKind kind, const ShapeParams& params, std::size_t n_points, std::uint64_t seed) {
    if (n_points < 4) throw InputError("synth: need at least 4 points");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    PointCloud cloud;
    Vec3List normals;
    cloud.positions.reserve(n_points);
    normals.reserve(n_points);
    constexpr double kTwoPi = 2.0 * std::numbers::pi;

    switch (kind) {
        case ShapeKind::Sphere: {
            if (!(params.radius > 0.0)) throw InputError("synth: sphere radius must be positive");
            for (std::size_t i = 0; i < n_points; ++i) {
                Vec3 u = detail::random_unit(rng);
                cloud.positions.push_back(params.radius * u);
                normals.push_back(u);
            }
            break;
        }
        case ShapeKind::NestedSpheres: {
            if (params.radii.empty()) throw InputError("synth: nested spheres need at least one radius");
            std::vector<double> areas;
            for (double r : params.radii) {
                if (!(r > 0.0)) throw InputError("synth: radii must be positive");
                areas.push_back(r * r);
            }
            const auto counts = detail::apportion(n_points, areas);
            for (std::size_t layer = 0; layer < params.radii.size(); ++layer) {
                for (std::size_t i = 0; i < counts[layer]; ++i) {
                    Vec3 u = detail::random_unit(rng);
                    cloud.positions.push_back(params.radii[layer] * u);
                    normals.push_back(u);
                }
            }
            break;
        }
        case ShapeKind::Torus: {
            const double big = params.major_radius, small = params.minor_radius;
            if (!(big > 0.0) || !(small > 0.0) || small >= big)
                throw InputError("synth: torus needs 0 < minor_radius < major_radius");
            // rejection on the area element (R + r cos phi)
            while (cloud.positions.size() < n_points) {
                const double theta = kTwoPi * uni(rng);
                const double phi = kTwoPi * uni(rng);
                if (uni(rng) * (big + small) > big + small * std::cos(phi)) continue;
                Vec3 n(std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi));
                Vec3 ring(big * std::cos(theta), big * std::sin(theta), 0.0);
                cloud.positions.push_back(ring + small * n);
                normals.push_back(n);
            }
            break;
        }
        case ShapeKind::ThinSlab: {
            const double a = params.slab_size, t = params.thickness;
            if (!(t > 0.0)) throw InputError("synth: slab thickness must be positive");
            if (!(a > 0.0)) throw InputError("synth: slab size must be positive");
            // box [-a/2,a/2]^2 x [-t/2,t/2]; six faces picked by area
            const double half[3] = {0.5 * a, 0.5 * a, 0.5 * t};
            const double face_area[3] = {a * t, a * t, a * a};  // faces normal to x, y, z
            std::discrete_distribution<int> pick({face_area[0], face_area[0], face_area[1], face_area[1],
                                                  face_area[2], face_area[2]});
            for (std::size_t i = 0; i < n_points; ++i) {
                const int f = pick(rng);
                const int axis = f / 2;
                const double sign = (f % 2 == 0) ? 1.0 : -1.0;
                Vec3 p, n = Vec3::Zero();
                for (int k = 0; k < 3; ++k) p[k] = (2.0 * uni(rng) - 1.0) * half[k];
                p[axis] = sign * half[axis];
                n[axis] = sign;
                cloud.positions.push_back(p);
                normals.push_back(n);
            }
            break;
        }
    }
    cloud.gt_normals = std::move(normals);
    return cloud;
}

/// Perturbs exactly round(ratio * N) distinct points by isotropic Gaussian
/// noise with standard deviation sigma * (bounding-box diagonal). Normals are
/// left untouched.
inline PointCloud add_noise(const PointCloud& cloud, double sigma, double ratio, std::uint64_t seed,
                            std::vector<Index>* perturbed = nullptr) {
    if (!(sigma >= 0.0)) throw InputError("noise: sigma must be non-negative");
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw InputError("noise: ratio must lie in [0, 1]");
    PointCloud out = cloud;
    const std::size_t n = cloud.size();
    const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(count);
    std::sort(order.begin(), order.end());
    if (perturbed) *perturbed = order;
    if (sigma == 0.0 || count == 0 || n == 0) return out;

    Vec3 lo = cloud.positions.front(), hi = lo;
    for (const auto& p : cloud.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double stddev = sigma * (hi - lo).norm();
    std::normal_distribution<double> g(0.0, stddev);
    for (Index i : order) {
        auto& p = out.positions[static_cast<std::size_t>(i)];
        p += Vec3(g(rng), g(rng), g(rng));
    }
    return out;
}

}  // namespace isorient
