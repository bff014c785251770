#pragma once

#include "isorient/isosurface.hpp"
#include "isorient/orient.hpp"
#include "isorient/solver.hpp"

#include <chrono>

namespace isorient {

enum class NoisePreset { None, Noisy };

struct PipelineConfig {
    int depth = 7;
    double alpha = 1e4;
    std::optional<double> beta;   // preset value when unset
    std::optional<double> gamma;  // preset value when unset
    std::size_t knn = 10;
    std::size_t cg_iters = 300;
    double rep_fraction = 1.0;
    NoisePreset noise_preset = NoisePreset::None;
    std::uint64_t seed = 0;
    NormalSource normal_source = NormalSource::FlippedFitted;
    bool wij_squared = false;
    bool jacobi = false;
    SplatScale splat_scale = SplatScale::Raw;
    int threads = 0;  // 0: runtime default
    double padding = 1.25;

    double preset_value() const { return noise_preset == NoisePreset::Noisy ? 1e-2 : 1e-4; }
    double resolved_beta() const { return beta.value_or(preset_value()); }
    double resolved_gamma() const { return gamma.value_or(preset_value()); }

    void validate() const {
        if (depth < 3 || depth > 10) throw InputError("depth must lie in [3, 10]");
        if (!(alpha >= 0.0) || !(resolved_beta() >= 0.0)) throw InputError("alpha and beta must be non-negative");
        if (!(resolved_gamma() > 0.0)) throw InputError("gamma must be positive");
        if (!(rep_fraction > 0.0 && rep_fraction <= 1.0)) throw InputError("rep_fraction must lie in (0, 1]");
        if (knn < 1) throw InputError("knn must be positive");
        if (!(padding >= 1.0)) throw InputError("padding must be at least 1");
    }
};

inline NoisePreset parse_noise_preset(const std::string& s) {
    if (s == "none") return NoisePreset::None;
    if (s == "noisy") return NoisePreset::Noisy;
    throw InputError("unknown noise preset '" + s + "' (expected none or noisy)");
}

inline SplatScale parse_splat_scale(const std::string& s) {
    if (s == "area") return SplatScale::Area;
    if (s == "raw") return SplatScale::Raw;
    throw InputError("unknown splat scale '" + s + "' (expected area or raw)");
}

inline NormalSource parse_normal_source(const std::string& s) {
    if (s == "flipped_fitted" || s == "fitted") return NormalSource::FlippedFitted;
    if (s == "optimized" || s == "optimized_normalized") return NormalSource::OptimizedNormalized;
    throw InputError("unknown normal source '" + s + "' (expected flipped_fitted or optimized)");
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    double d = 0.0;
    if (!parse_double(v, d)) throw InputError("config: bad number for '" + key + "': " + v);
    return d;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw InputError("config: bad boolean for '" + key + "': " + v);
}

}  // namespace detail

/// Applies `key = value` lines onto cfg. `#` starts a comment.
inline void apply_config_text(std::istream& in, PipelineConfig& cfg, const std::string& name = "config") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(name + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string v = detail::trim(line.substr(eq + 1));
        if (key == "depth") cfg.depth = static_cast<int>(detail::to_double(key, v));
        else if (key == "alpha") cfg.alpha = detail::to_double(key, v);
        else if (key == "beta") cfg.beta = detail::to_double(key, v);
        else if (key == "gamma") cfg.gamma = detail::to_double(key, v);
        else if (key == "knn") cfg.knn = static_cast<std::size_t>(detail::to_double(key, v));
        else if (key == "cg_iters") cfg.cg_iters = static_cast<std::size_t>(detail::to_double(key, v));
        else if (key == "rep_fraction") cfg.rep_fraction = detail::to_double(key, v);
        else if (key == "noise_preset") cfg.noise_preset = parse_noise_preset(v);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(v));
        else if (key == "normal_source") cfg.normal_source = parse_normal_source(v);
        else if (key == "wij_squared") cfg.wij_squared = detail::to_bool(key, v);
        else if (key == "jacobi") cfg.jacobi = detail::to_bool(key, v);
        else if (key == "splat_scale") cfg.splat_scale = parse_splat_scale(v);
        else if (key == "threads") cfg.threads = static_cast<int>(detail::to_double(key, v));
        else if (key == "padding") cfg.padding = detail::to_double(key, v);
        else throw InputError(name + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
}

inline void load_config_file(const std::filesystem::path& path, PipelineConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    apply_config_text(in, cfg, path.string());
}

/// Error raised inside a pipeline stage; `numerical` selects the exit code.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, bool numerical)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), numerical_(numerical) {}
    const std::string& stage() const { return stage_; }
    bool numerical() const { return numerical_; }

private:
    std::string stage_;
    bool numerical_;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineReport {
    std::vector<StageTiming> timings;
    std::size_t num_points = 0;
    std::size_t num_optimized = 0;
    std::size_t num_nodes = 0;
    std::size_t num_free_nodes = 0;
    std::size_t num_boundary_nodes = 0;
    std::size_t nnz_U = 0, nnz_A = 0, nnz_B = 0, nnz_M = 0;
    std::size_t cg_iterations = 0;
    double residual_initial = 0.0;
    double residual_final = 0.0;
    double residual_min = 0.0;
    Energies energies;
    double iso_error_initial = 0.0;  // mean |chi(p_i) - 1/2| at x = 0
    double iso_error_final = 0.0;
    std::size_t degenerate_fits = 0;
    std::size_t optimized_fallbacks = 0;
    std::vector<std::string> warnings;
    double beta = 0.0, gamma = 0.0;

    double total_seconds() const {
        double s = 0.0;
        for (const auto& t : timings) s += t.seconds;
        return s;
    }
};

struct PipelineResult {
    PointCloud cloud;  // normalized copy of the input
    OrientationResult orientation;  // outward, per input point
    Vec3List optimized_normals;     // raw n per representative (inward)
    Octree tree;
    std::vector<double> coefficients;  // over all nodes, boundary zero
    SolverReport solver;
    PipelineReport report;
};

/// Optional per-iteration observer: (iteration, residual, energies).
using TraceCallback = std::function<void(std::size_t, double, const Energies&)>;

constexpr std::size_t kLargeOptimizationWarning = 100000;

namespace detail {

class StageClock {
public:
    explicit StageClock(PipelineReport& r) : report_(r) {}

    template <class F>
    auto run(const std::string& stage, F&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            const auto t1 = std::chrono::steady_clock::now();
            report_.timings.push_back({stage, std::chrono::duration<double>(t1 - t0).count()});
        };
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                finish();
            } else {
                auto out = fn();
                finish();
                return out;
            }
        } catch (const StageError&) {
            throw;
        } catch (const NumericalError& e) {
            throw StageError(stage, e.what(), true);
        } catch (const std::exception& e) {
            throw StageError(stage, e.what(), false);
        }
    }

private:
    PipelineReport& report_;
};

inline double mean_iso_error(const SparseMatrix& U, const std::vector<double>& x) {
    const auto ux = U * x;
    double s = 0.0;
    for (double v : ux) s += std::abs(v - 0.5);
    return ux.empty() ? 0.0 : s / static_cast<double>(ux.size());
}

}  // namespace detail

/// normalize -> representatives -> neighbour graphs -> octree -> assembly ->
/// boundary elimination -> CG -> flip/propagate -> outward negation.
inline PipelineResult run_orientation(const PointCloud& input, const PipelineConfig& cfg,
                                      const TraceCallback& trace = {}) {
    PipelineResult res;
    PipelineReport& rep = res.report;
    detail::StageClock clock(rep);
    clock.run("config", [&] {
        cfg.validate();
        if (cfg.threads > 0) set_num_threads(cfg.threads);
    });
    rep.beta = cfg.resolved_beta();
    rep.gamma = cfg.resolved_gamma();
    rep.num_points = input.size();

    res.cloud = clock.run("normalize", [&] { return normalize(input, cfg.padding); });
    const Vec3List& pts = res.cloud.positions;

    std::vector<Index> reps = clock.run("subsample", [&] {
        const auto count = representative_count(pts.size(), cfg.rep_fraction);
        return subsample_representatives(pts.size(), count, cfg.seed);
    });
    const bool per_point = reps.size() == pts.size();
    rep.num_optimized = reps.size();
    if (reps.size() > kLargeOptimizationWarning)
        rep.warnings.push_back("optimizing " + std::to_string(reps.size()) +
                               " points; consider a representative fraction below 1");
    Vec3List rep_pts;
    if (!per_point) {
        rep_pts.reserve(reps.size());
        for (Index r : reps) rep_pts.push_back(pts[static_cast<std::size_t>(r)]);
    }
    const Vec3List& opt_pts = per_point ? pts : rep_pts;

    KnnGraph graph_all = clock.run("knn", [&] { return build_knn_graph(pts, std::min(cfg.knn, pts.size() - 1)); });
    KnnGraph graph_rep;
    if (!per_point)
        graph_rep = clock.run("knn_rep", [&] {
            if (opt_pts.size() < 2) throw InputError("too few representatives");
            return build_knn_graph(opt_pts, std::min(cfg.knn, opt_pts.size() - 1));
        });
    const KnnGraph& opt_graph = per_point ? graph_all : graph_rep;

    res.tree = clock.run("octree", [&] { return Octree::build(opt_pts, cfg.depth); });
    rep.num_nodes = res.tree.size();
    rep.num_boundary_nodes = res.tree.boundary_count();

    SystemOperators ops = clock.run("assembly", [&] {
        AssemblyOptions ao;
        ao.alpha = cfg.alpha;
        ao.beta = rep.beta;
        ao.gamma = rep.gamma;
        ao.wij_squared = cfg.wij_squared;
        ao.splat_scale = cfg.splat_scale;
        return assemble_operators(opt_pts, res.tree, opt_graph, ao);
    });
    ops = clock.run("eliminate", [&] { return eliminate_boundary(std::move(ops), res.tree); });
    rep.num_free_nodes = ops.free_map.size();
    rep.nnz_U = ops.U.nnz();
    rep.nnz_A = ops.A.nnz();
    rep.nnz_B = ops.B.nnz();
    rep.nnz_M = ops.M.nnz();

    SolutionState state = clock.run("solve", [&] {
        CgOptions co;
        co.max_iters = cfg.cg_iters;
        co.jacobi = cfg.jacobi;
        co.record_energies = static_cast<bool>(trace);
        auto [s, r] = solve_cg(ops, co);
        res.solver = std::move(r);
        return s;
    });
    rep.cg_iterations = res.solver.iterations;
    rep.residual_initial = res.solver.residuals.front();
    rep.residual_final = res.solver.residuals.back();
    rep.residual_min = *std::min_element(res.solver.residuals.begin(), res.solver.residuals.end());
    rep.energies = res.solver.final_energies;
    rep.iso_error_initial = detail::mean_iso_error(ops.U, std::vector<double>(ops.free_map.size(), 0.0));
    rep.iso_error_final = detail::mean_iso_error(ops.U, state.x);
    if (trace)
        for (std::size_t k = 0; k < res.solver.energy_trace.size(); ++k)
            trace(k, res.solver.residuals[k], res.solver.energy_trace[k]);
    res.coefficients = expand_coefficients(ops.free_map, state.x);

    res.orientation = clock.run("orient", [&] {
        res.optimized_normals.resize(opt_pts.size());
        for (std::size_t i = 0; i < opt_pts.size(); ++i) res.optimized_normals[i] = state.normal(i);
        const FittedNormals fitted = estimate_unoriented(pts, graph_all);
        rep.degenerate_fits =
            static_cast<std::size_t>(std::count(fitted.degenerate.begin(), fitted.degenerate.end(), char{1}));
        Vec3List rep_fitted;
        rep_fitted.reserve(reps.size());
        for (Index r : reps) rep_fitted.push_back(fitted.normals[static_cast<std::size_t>(r)]);
        Vec3List inward = flip_by_reference(rep_fitted, res.optimized_normals);
        std::vector<NormalSource> rep_source(reps.size(), NormalSource::FlippedFitted);
        if (cfg.normal_source == NormalSource::OptimizedNormalized) {
            auto opt = use_optimized(res.optimized_normals, inward);
            inward = std::move(opt.normals);
            for (std::size_t k = 0; k < reps.size(); ++k)
                if (!opt.fallback[k]) rep_source[k] = NormalSource::OptimizedNormalized;
            rep.optimized_fallbacks =
                static_cast<std::size_t>(std::count(opt.fallback.begin(), opt.fallback.end(), char{1}));
        }
        OrientationResult out = propagate_from_representatives(pts, reps, inward, fitted.normals);
        for (std::size_t k = 0; k < reps.size(); ++k) out.source[static_cast<std::size_t>(reps[k])] = rep_source[k];
        out.normals = negate_all(std::move(out.normals));
        if (per_point) out.rep_indices.clear();
        return out;
    });
    return res;
}

}  // namespace isorient
