// occtrack command line: simulate, track, eval, bench.

#include "occtrack/filter.hpp"
#include "occtrack/harness/bench.hpp"
#include "occtrack/harness/metrics.hpp"
#include "occtrack/harness/run.hpp"
#include "occtrack/io/config.hpp"
#include "occtrack/io/dataset.hpp"
#include "occtrack/io/scene_file.hpp"
#include "occtrack/io/trajectory.hpp"
#include "occtrack/simulator.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace
{
using namespace occtrack;

enum ExitCode
{
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kInvalid = 4,
    kDimensions = 5,
    kUntrackable = 6,
    kTimestamps = 7,
};

struct Overrides
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> particles;
    std::optional<std::string> mode;
    std::optional<int> threads;
};

RunConfig resolve_config(const Overrides& o)
{
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    apply_env_overrides(c);
    if (o.seed) c.filter.seed = *o.seed;
    if (o.particles) c.filter.particle_count = *o.particles;
    if (o.threads) c.filter.threads = *o.threads;
    if (o.mode)
    {
        try
        {
            c.filter.process.mode = parse_process_mode(*o.mode);
        }
        catch (const std::invalid_argument& e)
        {
            throw ConfigError(e.what());
        }
    }
    return c;
}

void add_overrides(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config, "INI run configuration");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--particles", o.particles, "particle count");
    cmd->add_option("--mode", o.mode, "process model")->check(CLI::IsMember({"random_walk", "controlled"}));
    cmd->add_option("--threads", o.threads, "worker threads for the particle loop");
}

std::string sibling(const std::string& path, const std::string& suffix)
{
    std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

bool is_dataset_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::string(magic, 4) == "DTRK";
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs
{
    std::string preset = "a";
    std::string scene;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::string mesh_output;
    std::string truth_output;
};

int cmd_simulate(const SimulateArgs& a)
{
    Scene scene = a.scene.empty() ? presets::by_name(a.preset, a.seed.value_or(1)) : load_scene(a.scene);
    if (a.seed) scene.seed = *a.seed;
    const Simulator sim(scene);
    double occluded = 0.0;
    const Dataset data = sim.generate(&occluded);
    save_dataset(a.output, data);
    if (!a.mesh_output.empty()) save_obj(a.mesh_output, scene.tracked.mesh);
    if (!a.truth_output.empty()) save_trajectory(a.truth_output, ground_truth_of(data));

    std::printf("frames              %zu\n", data.frames.size());
    std::printf("duration            %.3f s\n", scene.duration);
    std::printf("image               %dx%d\n", data.camera.width, data.camera.height);
    std::printf("controls            %s\n", data.has_controls ? "yes" : "no");
    std::printf("occlusion fraction  %.4f\n", occluded);
    std::printf("written             %s\n", a.output.c_str());
    return kOk;
}

// ---- track ------------------------------------------------------------------

struct TrackArgs
{
    std::string dataset;
    std::string mesh;
    std::string output;
    std::string diagnostics;
    Overrides overrides;
};

int cmd_track(const TrackArgs& a)
{
    const Dataset data = load_dataset(a.dataset);
    const MeshRaycaster object(load_obj(a.mesh));
    RunConfig rc = resolve_config(a.overrides);
    FilterConfig config = rc.filter;

    if (rc.camera_given)
    {
        if (!(config.camera == data.camera))
            throw DimensionMismatch("configured camera differs from the dataset intrinsics");
    }
    else
    {
        config.camera = data.camera;
        if (rc.m_given && config.observation.max_range != data.camera.max_range)
            throw DimensionMismatch("configured range m differs from the dataset max range");
        config.observation.max_range = data.camera.max_range;
    }
    if (!rc.initial_pose_given)
    {
        if (!data.has_ground_truth || data.frames.empty())
            throw ConfigError("no [filter] initial_pose and the dataset has no ground truth to start from");
        config.initial_pose = normalized(*data.frames.front().ground_truth);
    }
    if (config.process.mode == ProcessMode::controlled && !data.has_controls)
        std::fprintf(stderr, "warning: controlled mode but the dataset has no controls; using the random walk\n");

    const TrackingOutput out = run_tracking(data, object, config);
    save_trajectory(a.output, out.estimates);
    const std::string diag_path = a.diagnostics.empty() ? sibling(a.output, "_diagnostics.csv") : a.diagnostics;
    std::ofstream diag(diag_path);
    if (!diag) throw IoError("cannot write diagnostics '" + diag_path + "'");
    write_diagnostics_csv(diag, out.diagnostics);

    std::size_t lost = 0;
    for (const auto& r : out.diagnostics)
        if (r.step.tracking_lost) ++lost;
    std::printf("frames        %zu\n", out.estimates.size());
    std::printf("particles     %d\n", config.particle_count);
    std::printf("mode          %s\n", to_string(config.process.mode).c_str());
    std::printf("lost frames   %zu\n", lost);
    std::printf("trajectory    %s\n", a.output.c_str());
    std::printf("diagnostics   %s\n", diag_path.c_str());
    return kOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs
{
    std::string estimate;
    std::string truth;
    std::string output;
    double threshold = 0.05;
};

int cmd_eval(const EvalArgs& a)
{
    const TrajectoryRecord est = load_trajectory(a.estimate);
    const TrajectoryRecord truth =
        is_dataset_file(a.truth) ? ground_truth_of(load_dataset(a.truth)) : load_trajectory(a.truth);
    const MetricsReport report = evaluate_trajectory(est, truth, a.threshold);
    std::fputs(format_summary(report).c_str(), stdout);
    if (!a.output.empty())
    {
        std::ofstream out(a.output);
        if (!out) throw IoError("cannot write metrics '" + a.output + "'");
        write_metrics_csv(out, report);
    }
    return kOk;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs
{
    std::string mesh;
    std::size_t frames = 300;
    std::size_t warmup = 10;
    double scale = 1.0;
    Overrides overrides;
};

void print_bench(const char* label, const BenchResult& r)
{
    std::printf("%-9s N=%d I=%zu threads=%d  %.2f ms/step  %.2f steps/s  %.3g particle-pixels/s\n", label,
                r.particles, r.pixels, r.threads, r.median_step_seconds * 1e3, r.steps_per_second,
                r.evaluations_per_second);
}

int cmd_bench(const BenchArgs& a)
{
    RunConfig rc = resolve_config(a.overrides);
    TriangleMesh mesh = a.mesh.empty() ? make_tool() : load_obj(a.mesh);
    Scene scene = presets::free_motion(rc.filter.seed, std::move(mesh));
    scene.camera = scene.camera.rescaled(a.scale);
    const Simulator sim(scene);
    const Dataset data = sim.generate();

    FilterConfig config = rc.filter;
    config.camera = data.camera;
    config.observation.max_range = data.camera.max_range;
    config.initial_pose = *data.frames.front().ground_truth;
    std::vector<DepthImage> frames;
    for (const auto& f : data.frames) frames.push_back(f.depth);
    const double dt = 1.0 / scene.frame_rate;

    FilterConfig single = config;
    single.threads = 1;
    print_bench("single", run_benchmark(sim.tracked_caster(), single, frames, dt, a.warmup, a.frames));
    if (config.threads > 1)
        print_bench("parallel", run_benchmark(sim.tracked_caster(), config, frames, dt, a.warmup, a.frames));
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Occlusion-aware particle filter for 6-DoF object tracking in depth images"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "render a synthetic dataset");
    sim->add_option("--preset", sim_args.preset, "scenario: a, b, c, a-occluded")
        ->check(CLI::IsMember({"a", "b", "c", "a-occluded", "free", "controlled", "disturbed"}));
    sim->add_option("--scene", sim_args.scene, "JSON scene file (overrides --preset)");
    sim->add_option("--seed", sim_args.seed, "random seed");
    sim->add_option("--output,-o", sim_args.output, "dataset file")->required();
    sim->add_option("--mesh-output", sim_args.mesh_output, "write the tracked mesh as OBJ");
    sim->add_option("--truth-output", sim_args.truth_output, "write the ground-truth trajectory CSV");

    TrackArgs track_args;
    auto* track = app.add_subcommand("track", "run the filter over a dataset");
    track->add_option("dataset", track_args.dataset, "dataset file")->required();
    track->add_option("--mesh", track_args.mesh, "object mesh (OBJ)")->required();
    track->add_option("--output,-o", track_args.output, "estimated trajectory CSV")->required();
    track->add_option("--diagnostics", track_args.diagnostics, "per-frame diagnostics CSV");
    add_overrides(track, track_args.overrides);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "compare an estimate against ground truth");
    eval->add_option("estimate", eval_args.estimate, "estimated trajectory CSV")->required();
    eval->add_option("truth", eval_args.truth, "ground-truth trajectory CSV or dataset")->required();
    eval->add_option("--output,-o", eval_args.output, "per-frame metrics CSV");
    eval->add_option("--threshold", eval_args.threshold, "tracking-loss threshold in meters")
        ->check(CLI::PositiveNumber);

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "measure filter throughput");
    bench->add_option("--mesh", bench_args.mesh, "object mesh (OBJ), default: built-in tool");
    bench->add_option("--frames", bench_args.frames, "measured steps")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bench_args.warmup, "discarded steps");
    bench->add_option("--scale", bench_args.scale, "pixel count factor relative to 128x96")
        ->check(CLI::PositiveNumber);
    add_overrides(bench, bench_args.overrides);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try
    {
        if (*sim) return cmd_simulate(sim_args);
        if (*track) return cmd_track(track_args);
        if (*eval) return cmd_eval(eval_args);
        if (*bench) return cmd_bench(bench_args);
    }
    catch (const IoError& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    }
    catch (const DimensionMismatch& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDimensions;
    }
    catch (const UntrackableStart& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUntrackable;
    }
    catch (const TimestampMismatch& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kTimestamps;
    }
    catch (const ConfigError& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalid;
    }
    catch (const DatasetError& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalid;
    }
    catch (const MeshError& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalid;
    }
    catch (const std::invalid_argument& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalid;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
    return kUsage;
}
