// Orients a synthetic sphere and prints the accuracy against its analytic normals.
//   orient_sphere [points] [depth] [noise_sigma]
#include "isorient/pipeline.hpp"

#include <cstdio>
#include <cstdlib>

using namespace isorient;

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 5000;
    const int depth = argc > 2 ? std::atoi(argv[2]) : 6;
    const double sigma = argc > 3 ? std::atof(argv[3]) : 0.0;

    PointCloud cloud = synth_shape(ShapeKind::Sphere, ShapeParams{}, n, 7);
    PipelineConfig cfg;
    cfg.depth = depth;
    if (sigma > 0.0) {
        cloud = add_noise(cloud, sigma, 1.0, 11);
        cfg.noise_preset = NoisePreset::Noisy;
    }

    const PipelineResult res = run_orientation(cloud, cfg);
    const AccuracyStats acc = orientation_accuracy(res.orientation.normals, *cloud.gt_normals);

    std::printf("points %zu  depth %d  nodes %zu  cg %zu\n", n, depth, res.report.num_nodes,
                res.report.cg_iterations);
    std::printf("residual %.3e -> %.3e\n", res.report.residual_initial, res.report.residual_final);
    std::printf("iso error %.4f -> %.4f\n", res.report.iso_error_initial, res.report.iso_error_final);
    for (const auto& t : res.report.timings) std::printf("  %-10s %8.3f s\n", t.stage.c_str(), t.seconds);
    std::printf("accuracy %.4f (%zu / %zu)\n", acc.accuracy, acc.n_correct, acc.n_points);
    return 0;
}
