#pragma once

#include "occtrack/filter.hpp"
#include "occtrack/harness/metrics.hpp"

#include <chrono>
#include <stdexcept>
#include <vector>

namespace occtrack
{
struct BenchResult
{
    int particles = 0;
    std::size_t pixels = 0;
    int threads = 1;
    std::size_t frames = 0;
    double median_step_seconds = 0.0;
    double steps_per_second = 0.0;
    /// Particles times image pixels per second.
    double evaluations_per_second = 0.0;
};

/**
 * Steady-state filter throughput. Frames are replayed cyclically; the first
 * \p warmup steps are discarded and the median over \p measured steps is
 * reported.
 */
inline BenchResult run_benchmark(const MeshRaycaster& object, const FilterConfig& config,
                                 const std::vector<DepthImage>& frames, double dt, std::size_t warmup = 10,
                                 std::size_t measured = 300)
{
    if (frames.empty()) throw std::invalid_argument("benchmark: no frames");
    if (measured == 0) throw std::invalid_argument("benchmark: nothing to measure");
    using clock = std::chrono::steady_clock;

    ParticleSet set = initialize(config, object);
    std::vector<double> seconds;
    seconds.reserve(measured);
    for (std::size_t k = 0; k < warmup + measured; ++k)
    {
        const DepthImage& z = frames[k % frames.size()];
        const auto start = clock::now();
        set = step(std::move(set), z, std::nullopt, dt, object, config);
        const Pose pose = estimate(set, config.estimator);
        const auto stop = clock::now();
        (void)pose;
        if (k >= warmup) seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }

    BenchResult r;
    r.particles = config.particle_count;
    r.pixels = config.camera.pixel_count();
    r.threads = config.threads;
    r.frames = measured;
    r.median_step_seconds = median(seconds);
    r.steps_per_second = 1.0 / r.median_step_seconds;
    r.evaluations_per_second =
        r.steps_per_second * static_cast<double>(r.particles) * static_cast<double>(r.pixels);
    return r;
}

}  // namespace occtrack
