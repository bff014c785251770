#include "isorient/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

using namespace isorient;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kInputError = 1, kNumericalError = 2 };

struct PipelineFlags {
    std::string config_path;
    std::optional<int> depth;
    std::optional<double> alpha, beta, gamma, rep_fraction;
    std::optional<std::size_t> knn, cg_iters;
    std::optional<std::string> noise_preset, normal_source, splat_scale;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool wij_squared = false;
    bool jacobi = false;
    std::string trace_path;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value configuration file (flags override it)");
        cmd->add_option("--depth", depth, "maximum octree depth [3, 10]");
        cmd->add_option("--alpha", alpha, "Poisson weight");
        cmd->add_option("--beta", beta, "local consistency weight");
        cmd->add_option("--gamma", gamma, "normal regularizer weight");
        cmd->add_option("--knn", knn, "neighbours per point");
        cmd->add_option("--cg-iters", cg_iters, "conjugate gradient iterations");
        cmd->add_option("--rep-fraction", rep_fraction, "fraction of points optimized (0, 1]");
        cmd->add_option("--noise-preset", noise_preset, "none | noisy");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--normal-source", normal_source, "flipped_fitted | optimized");
        cmd->add_option("--splat-scale", splat_scale, "area | raw normalization of the splatted field");
        cmd->add_option("--trace", trace_path, "write the per-iteration residual and energies as CSV");
        cmd->add_option("--threads", threads, "worker threads");
        cmd->add_flag("--wij-squared", wij_squared, "use squared distances in the consistency weights");
        cmd->add_flag("--jacobi", jacobi, "diagonal preconditioner for CG");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_path.empty()) load_config_file(config_path, cfg);
        if (depth) cfg.depth = *depth;
        if (alpha) cfg.alpha = *alpha;
        if (beta) cfg.beta = *beta;
        if (gamma) cfg.gamma = *gamma;
        if (knn) cfg.knn = *knn;
        if (cg_iters) cfg.cg_iters = *cg_iters;
        if (rep_fraction) cfg.rep_fraction = *rep_fraction;
        if (noise_preset) cfg.noise_preset = parse_noise_preset(*noise_preset);
        if (normal_source) cfg.normal_source = parse_normal_source(*normal_source);
        if (splat_scale) cfg.splat_scale = parse_splat_scale(*splat_scale);
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (wij_squared) cfg.wij_squared = true;
        if (jacobi) cfg.jacobi = true;
        return cfg;
    }
};

json accuracy_json(const AccuracyStats& s) {
    return {{"accuracy", s.accuracy},
            {"n_points", s.n_points},
            {"n_correct", s.n_correct},
            {"over_97", s.over_97},
            {"over_90", s.over_90}};
}

json report_json(const PipelineReport& r, const PipelineConfig& cfg) {
    json timings = json::object();
    for (const auto& t : r.timings) timings[t.stage] = t.seconds;
    return {{"config",
             {{"depth", cfg.depth},
              {"alpha", cfg.alpha},
              {"beta", r.beta},
              {"gamma", r.gamma},
              {"knn", cfg.knn},
              {"cg_iters", cfg.cg_iters},
              {"rep_fraction", cfg.rep_fraction},
              {"seed", cfg.seed},
              {"wij_squared", cfg.wij_squared},
              {"jacobi", cfg.jacobi},
              {"splat_scale", cfg.splat_scale == SplatScale::Area ? "area" : "raw"}}},
            {"timings", timings},
            {"total_seconds", r.total_seconds()},
            {"num_points", r.num_points},
            {"num_optimized", r.num_optimized},
            {"num_nodes", r.num_nodes},
            {"num_free_nodes", r.num_free_nodes},
            {"num_boundary_nodes", r.num_boundary_nodes},
            {"nnz",
             {{"U", r.nnz_U},
              {"A", r.nnz_A},
              {"B", r.nnz_B},
              {"M", r.nnz_M}}},
            {"residual",
             {{"iterations", r.cg_iterations},
              {"initial", r.residual_initial},
              {"final", r.residual_final},
              {"min", r.residual_min}}},
            {"energies",
             {{"iso", r.energies.iso},
              {"poisson", r.energies.poisson},
              {"local", r.energies.local},
              {"reg", r.energies.reg},
              {"total", r.energies.total}}},
            {"iso_error", {{"initial", r.iso_error_initial}, {"final", r.iso_error_final}}},
            {"degenerate_fits", r.degenerate_fits},
            {"optimized_fallbacks", r.optimized_fallbacks},
            {"warnings", r.warnings}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
}

PointCloud load_stage(const std::string& path) {
    try {
        return load_cloud(path);
    } catch (const std::exception& e) {
        throw StageError("load", e.what(), false);
    }
}

PipelineResult run_with_trace(const PointCloud& cloud, const PipelineConfig& cfg, const std::string& trace_path) {
    if (trace_path.empty()) return run_orientation(cloud, cfg);
    std::ostringstream csv;
    csv << "iter,residual,e_iso,e_poi,e_loc,r,total\n" << std::setprecision(12);
    auto res = run_orientation(cloud, cfg, [&](std::size_t it, double resid, const Energies& e) {
        csv << it << ',' << resid << ',' << e.iso << ',' << e.poisson << ',' << e.local << ',' << e.reg << ','
            << e.total << '\n';
    });
    write_text(trace_path, csv.str());
    return res;
}

int cmd_orient(const std::string& input, const std::string& output, const std::string& report_path,
               const PipelineFlags& flags) {
    const PipelineConfig cfg = flags.resolve();
    const PointCloud cloud = load_stage(input);
    const PipelineResult res = run_with_trace(cloud, cfg, flags.trace_path);
    for (const auto& w : res.report.warnings) std::cerr << "warning: " << w << '\n';
    try {
        save_cloud(output, cloud.positions, &res.orientation.normals);
    } catch (const std::exception& e) {
        throw StageError("write", e.what(), false);
    }
    json rep = report_json(res.report, cfg);
    rep["input"] = input;
    rep["output"] = output;
    if (cloud.has_normals()) rep["accuracy"] = accuracy_json(orientation_accuracy(res.orientation.normals, *cloud.gt_normals));
    if (!report_path.empty())
        write_text(report_path, rep.dump(2) + "\n");
    else
        std::cout << rep.dump(2) << '\n';
    return kOk;
}

bool is_cloud_file(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    return ext == ".ply" || ext == ".xyz" || ext == ".PLY" || ext == ".XYZ";
}

AccuracyStats evaluate_pair(const std::filesystem::path& result, const std::filesystem::path& gt_path) {
    const PointCloud res = load_cloud(result);
    if (!res.has_normals()) throw InputError("'" + result.string() + "' has no normals");
    Vec3List gt;
    if (gt_path.empty()) {
        throw InputError("no ground truth given for '" + result.string() + "'");
    } else {
        const PointCloud g = load_cloud(gt_path);
        if (!g.has_normals()) throw InputError("'" + gt_path.string() + "' has no ground-truth normals");
        if (g.size() != res.size())
            throw InputError("point count mismatch: " + std::to_string(res.size()) + " vs " + std::to_string(g.size()));
        gt = *g.gt_normals;
    }
    return orientation_accuracy(*res.gt_normals, gt);
}

int cmd_evaluate(const std::string& result_path, const std::string& gt_arg, const std::string& json_path) {
    namespace fs = std::filesystem;
    json out;
    if (fs::is_directory(result_path)) {
        if (gt_arg.empty() || !fs::is_directory(gt_arg))
            throw InputError("directory evaluation needs --gt pointing to a directory");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(result_path))
            if (e.is_regular_file() && is_cloud_file(e.path())) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw InputError("no point clouds in '" + result_path + "'");
        json shapes = json::array();
        double sum = 0.0;
        std::size_t n97 = 0, n90 = 0;
        for (const auto& f : files) {
            fs::path gt = fs::path(gt_arg) / f.filename();
            if (!fs::exists(gt)) {
                for (const char* ext : {".ply", ".xyz"}) {
                    fs::path alt = fs::path(gt_arg) / f.stem();
                    alt += ext;
                    if (fs::exists(alt)) {
                        gt = alt;
                        break;
                    }
                }
            }
            if (!fs::exists(gt)) throw InputError("no ground truth for '" + f.filename().string() + "'");
            const AccuracyStats s = evaluate_pair(f, gt);
            json j = accuracy_json(s);
            j["name"] = f.filename().string();
            shapes.push_back(j);
            sum += s.accuracy;
            n97 += s.over_97 ? 1 : 0;
            n90 += s.over_90 ? 1 : 0;
        }
        const auto count = static_cast<double>(files.size());
        out = {{"shapes", shapes},
               {"count", files.size()},
               {"average", sum / count},
               {"over_97", static_cast<double>(n97) / count},
               {"over_90", static_cast<double>(n90) / count}};
    } else {
        out = accuracy_json(evaluate_pair(result_path, gt_arg));
    }
    if (!json_path.empty())
        write_text(json_path, out.dump(2) + "\n");
    else
        std::cout << out.dump(2) << '\n';
    return kOk;
}

int cmd_export_field(const std::string& input, const std::string& grid_path, const std::string& mesh_path,
                     Index resolution, double isovalue, const PipelineFlags& flags) {
    const PipelineConfig cfg = flags.resolve();
    const PointCloud cloud = load_stage(input);
    const PipelineResult res = run_with_trace(cloud, cfg, flags.trace_path);
    ScalarGrid grid;
    TriangleMesh mesh;
    try {
        grid = sample_field(res.tree, res.coefficients, resolution);
        mesh = marching_cubes(grid, isovalue);
    } catch (const NumericalError& e) {
        throw StageError("field", e.what(), true);
    } catch (const std::exception& e) {
        throw StageError("field", e.what(), false);
    }
    try {
        if (!grid_path.empty()) {
            std::ofstream out(grid_path);
            if (!out) throw InputError("cannot write '" + grid_path + "'");
            grid.write(out);
        }
        if (!mesh_path.empty()) {
            std::ofstream out(mesh_path);
            if (!out) throw InputError("cannot write '" + mesh_path + "'");
            if (std::filesystem::path(mesh_path).extension() == ".obj")
                write_mesh_obj(out, mesh, isovalue);
            else
                write_mesh_ply(out, mesh, isovalue);
        }
    } catch (const std::exception& e) {
        throw StageError("write", e.what(), false);
    }
    json rep = report_json(res.report, cfg);
    rep["field"] = {{"resolution", resolution},
                    {"isovalue", isovalue},
                    {"vertices", mesh.vertices.size()},
                    {"triangles", mesh.triangles.size()},
                    {"components", connected_components(mesh)}};
    std::cout << rep.dump(2) << '\n';
    return kOk;
}

ShapeKind parse_kind(const std::string& s) {
    if (s == "sphere") return ShapeKind::Sphere;
    if (s == "nested_spheres") return ShapeKind::NestedSpheres;
    if (s == "torus") return ShapeKind::Torus;
    if (s == "thin_slab") return ShapeKind::ThinSlab;
    throw InputError("unknown shape '" + s + "' (sphere, nested_spheres, torus, thin_slab)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point cloud normal orientation with isovalue-constrained Poisson optimization"};
    app.require_subcommand(1);

    PipelineFlags orient_flags, field_flags;
    std::string input, output = "oriented.ply", report_path;
    auto* orient = app.add_subcommand("orient", "orient the normals of a point cloud");
    orient->add_option("input", input, "input .xyz or .ply")->required();
    orient->add_option("-o,--output", output, "oriented output (.ply or .xyz)");
    orient->add_option("--report", report_path, "write the run report as JSON");
    orient_flags.attach(orient);

    std::string eval_path, gt_path, eval_json;
    auto* evaluate = app.add_subcommand("evaluate", "orientation accuracy against ground truth");
    evaluate->add_option("result", eval_path, "oriented cloud, or a directory of them")->required();
    evaluate->add_option("--gt", gt_path, "ground-truth cloud, or a directory with matching names");
    evaluate->add_option("--json", eval_json, "write the statistics to a file");

    std::string field_input, grid_path, mesh_path;
    Index resolution = 128;
    double isovalue = 0.5;
    auto* field = app.add_subcommand("export-field", "sample the optimized indicator and extract its isosurface");
    field->add_option("input", field_input, "input .xyz or .ply")->required();
    field->add_option("--grid", grid_path, "grid output");
    field->add_option("--mesh", mesh_path, "mesh output (.ply or .obj)");
    field->add_option("--resolution", resolution, "samples per axis [2, 512]");
    field->add_option("--isovalue", isovalue, "extraction level");
    field_flags.attach(field);

    std::string kind, synth_out;
    std::size_t synth_n = 2000;
    std::uint64_t synth_seed = 0;
    ShapeParams params;
    double noise_sigma = 0.0, noise_ratio = 1.0;
    auto* synth = app.add_subcommand("synth", "write a synthetic cloud with ground-truth normals");
    synth->add_option("kind", kind, "sphere | nested_spheres | torus | thin_slab")->required();
    synth->add_option("-o,--output", synth_out, "output (.xyz or .ply)")->required();
    synth->add_option("-n,--points", synth_n, "number of points");
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--radius", params.radius, "sphere radius");
    synth->add_option("--radii", params.radii, "nested sphere radii");
    synth->add_option("--major-radius", params.major_radius, "torus major radius");
    synth->add_option("--minor-radius", params.minor_radius, "torus minor radius");
    synth->add_option("--slab-size", params.slab_size, "slab side length");
    synth->add_option("--thickness", params.thickness, "slab thickness");
    synth->add_option("--noise-sigma", noise_sigma, "noise std-dev as a fraction of the bbox diagonal");
    synth->add_option("--noise-ratio", noise_ratio, "fraction of points perturbed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*orient) return cmd_orient(input, output, report_path, orient_flags);
        if (*evaluate) return cmd_evaluate(eval_path, gt_path, eval_json);
        if (*field) return cmd_export_field(field_input, grid_path, mesh_path, resolution, isovalue, field_flags);
        if (*synth) {
            PointCloud c = synth_shape(parse_kind(kind), params, synth_n, synth_seed);
            if (noise_sigma > 0.0) c = add_noise(c, noise_sigma, noise_ratio, synth_seed + 1);
            save_cloud(synth_out, c.positions, &*c.gt_normals);
            return kOk;
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.numerical() ? kNumericalError : kInputError;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kOk;
}
