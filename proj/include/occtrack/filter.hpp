#pragma once

#include "occtrack/geometry/camera.hpp"
#include "occtrack/geometry/pose.hpp"
#include "occtrack/geometry/ray_cast.hpp"
#include "occtrack/observation.hpp"
#include "occtrack/occlusion.hpp"
#include "occtrack/process.hpp"
#include "occtrack/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace occtrack
{
enum class Estimator
{
    weighted_mean,
    max_weight,
};

struct FilterConfig
{
    int particle_count = 200;
    ObservationParams observation;
    OcclusionParams occlusion;
    ProcessParams process;
    CameraIntrinsics camera;

    /// Gaussian prior around the initial pose (same tangent-space convention
    /// as the random walk, but the sigmas are absolute).
    Pose initial_pose;
    double init_trans_sigma = 0.0;
    double init_rot_sigma = 0.0;

    std::uint64_t seed = 1;
    /// Resample only when ESS < ess_threshold * N; 0 resamples every frame.
    double ess_threshold = 0.0;
    Estimator estimator = Estimator::weighted_mean;
    /// Worker threads for the particle loop. Results do not depend on it.
    int threads = 1;

    void validate() const
    {
        if (particle_count < 1) throw std::invalid_argument("filter: particle_count must be >= 1");
        if (threads < 1) throw std::invalid_argument("filter: threads must be >= 1");
        if (!(init_trans_sigma >= 0.0) || !(init_rot_sigma >= 0.0))
            throw std::invalid_argument("filter: initial sigmas must be >= 0");
        if (!(ess_threshold >= 0.0 && ess_threshold <= 1.0))
            throw std::invalid_argument("filter: ess_threshold must lie in [0, 1]");
        observation.validate();
        occlusion.validate();
        process.validate();
        camera.validate();
        if (camera.max_range != observation.max_range)
            throw std::invalid_argument("filter: camera max_range differs from observation m");
    }
};

struct Particle
{
    Pose pose;
    OcclusionBelief occlusion;
    double log_weight = 0.0;
};

/// Per-frame filter health, also written to the diagnostics CSV.
struct StepDiagnostics
{
    double log_evidence = 0.0;    // log p(z_t | z_1:t-1) under the particle approximation
    double ess = 0.0;             // effective sample size before resampling
    double mean_visibility = 0.0; // weighted mean posterior p_vis over object pixels with data
    bool tracking_lost = false;
    bool resampled = false;
};

struct ParticleSet
{
    std::vector<Particle> particles;
    double timestamp = 0.0;
    std::uint64_t frame = 0;
    /// Slot holding (a descendant of) the highest-weight particle of the last step.
    std::size_t mode_index = 0;
    StepDiagnostics diagnostics;

    std::size_t size() const { return particles.size(); }
};

/// The initial mean pose does not put a single model pixel into the image.
class UntrackableStart : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Result of one pass of the observation model over a particle's pixels.
struct PixelPass
{
    double log_likelihood = 0.0;
    std::size_t evidence_pixels = 0;  // object pixels with a valid measurement
    double visibility_sum = 0.0;      // sum of posterior p_vis over those pixels
};

namespace detail
{
/**
 * Rao-Blackwellised likelihood of one pose, optionally writing the occlusion
 * posterior. \p next may alias \p prev. Pixels off the model contribute the
 * background density 1/m; invalid measurements contribute 1.
 */
inline PixelPass evaluate_pixels(const Pose& pose, const double* prev, double* next,
                                 const DepthImage& z, std::size_t valid_count,
                                 const VisibilityTransition& transition,
                                 const MeshRaycaster& object, const CameraIntrinsics& cam,
                                 const ObservationParams& obs)
{
    const std::size_t pixels = z.size();
    if (next)
        for (std::size_t i = 0; i < pixels; ++i) next[i] = transition(prev[i]);

    PixelPass pass;
    object.for_each_hit(pose, cam, [&](std::size_t i, double d) {
        const double zi = z[i];
        if (!is_valid_depth(zi, obs.max_range)) return;
        ++pass.evidence_pixels;
        const double prior = next ? next[i] : transition(prev[i]);
        const double lv = lik_visible(zi, d, obs);
        const double lo = lik_occluded(zi, d, obs);
        pass.log_likelihood += std::log(prior * lv + (1.0 - prior) * lo);
        if (next)
        {
            const double post = visibility_posterior(prior, lv, lo);
            next[i] = post;
            pass.visibility_sum += post;
        }
    });
    const auto background = static_cast<double>(valid_count - pass.evidence_pixels);
    pass.log_likelihood += background * std::log(1.0 / obs.max_range);
    return pass;
}

inline void check_frame(const DepthImage& z, const CameraIntrinsics& cam)
{
    if (z.width != cam.width || z.height != cam.height || z.size() != cam.pixel_count())
        throw std::invalid_argument("depth image size does not match the camera intrinsics");
}

inline void check_belief(const Particle& particle, const CameraIntrinsics& cam)
{
    if (particle.occlusion.size() != cam.pixel_count())
        throw std::invalid_argument("occlusion belief size does not match the camera");
}
}  // namespace detail

/**
 * log p(z_t | r_1:t, z_1:t-1): the product over pixels of the four-term
 * sum over current and previous occlusion states. Does not modify the
 * particle.
 */
inline double log_likelihood(const Particle& particle, const DepthImage& z, double dt,
                             const MeshRaycaster& object, const CameraIntrinsics& cam,
                             const ObservationParams& obs, const OcclusionParams& occ)
{
    detail::check_frame(z, cam);
    detail::check_belief(particle, cam);
    const VisibilityTransition transition(dt, occ);
    return detail::evaluate_pixels(particle.pose, particle.occlusion.p_vis.data(), nullptr, z,
                                   count_valid(z, obs.max_range), transition, object, cam, obs)
        .log_likelihood;
}

/// Recursive per-pixel occlusion posterior at the particle's current pose.
inline Particle update_particle_occlusions(Particle particle, const DepthImage& z, double dt,
                                           const MeshRaycaster& object, const CameraIntrinsics& cam,
                                           const ObservationParams& obs, const OcclusionParams& occ)
{
    detail::check_frame(z, cam);
    detail::check_belief(particle, cam);
    const VisibilityTransition transition(dt, occ);
    double* p = particle.occlusion.p_vis.data();
    detail::evaluate_pixels(particle.pose, p, p, z, count_valid(z, obs.max_range), transition,
                            object, cam, obs);
    return particle;
}

/**
 * Systematic resampling: one uniform offset, N evenly spaced positions on
 * the cumulative weights. Index j is drawn floor(N w_j) or ceil(N w_j) times.
 */
template <typename Rng>
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t n, Rng& rng)
{
    if (weights.empty() || n == 0) throw std::invalid_argument("systematic_resample: empty input");
    double total = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < weights.size(); ++j)
    {
        if (!(weights[j] >= 0.0)) throw std::invalid_argument("systematic_resample: negative weight");
        total += weights[j];
        if (weights[j] > 0.0) last_positive = j;
    }
    if (!(total > 0.0)) throw std::invalid_argument("systematic_resample: all weights are zero");
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("systematic_resample: weights must sum to 1");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double offset = unit(rng);
    std::vector<std::size_t> out(n);
    std::size_t j = 0;
    double cumulative = weights[0];
    for (std::size_t k = 0; k < n; ++k)
    {
        const double position = (static_cast<double>(k) + offset) / static_cast<double>(n);
        while (position >= cumulative && j < last_positive)
        {
            ++j;
            cumulative += weights[j];
        }
        out[k] = j;
    }
    return out;
}

/// Normalized weights from log weights (max subtracted before exponentiating).
inline std::vector<double> normalized_weights(std::span<const double> log_weights)
{
    std::vector<double> w(log_weights.size());
    double max = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) max = std::max(max, lw);
    if (!std::isfinite(max))
    {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    double sum = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l)
    {
        w[l] = std::isfinite(log_weights[l]) ? std::exp(log_weights[l] - max) : 0.0;
        sum += w[l];
    }
    for (double& x : w) x /= sum;
    return w;
}

inline double log_sum_exp(std::span<const double> values)
{
    double max = -std::numeric_limits<double>::infinity();
    for (double v : values) max = std::max(max, v);
    if (!std::isfinite(max)) return max;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - max);
    return max + std::log(sum);
}

/// Draws the initial particle set around config.initial_pose.
inline ParticleSet initialize(const FilterConfig& config, const MeshRaycaster& object)
{
    config.validate();
    std::size_t visible = 0;
    object.for_each_hit(config.initial_pose, config.camera, [&](std::size_t, double) { ++visible; });
    if (visible == 0)
        throw UntrackableStart("initial pose projects no object pixels into the camera");

    Rng rng = make_stream(config.seed, StreamTag::initialization);
    const bool degenerate = config.init_trans_sigma == 0.0 && config.init_rot_sigma == 0.0;
    ParticleSet set;
    set.particles.reserve(static_cast<std::size_t>(config.particle_count));
    for (int l = 0; l < config.particle_count; ++l)
    {
        Particle p;
        const Pose delta = sample_perturbation(config.init_trans_sigma, config.init_rot_sigma,
                                               object.centroid(), rng);
        p.pose = degenerate ? config.initial_pose : compose(config.initial_pose, delta);
        p.occlusion = OcclusionBelief(config.camera.pixel_count(), config.occlusion.initial_p_vis);
        set.particles.push_back(std::move(p));
    }
    return set;
}

/**
 * One filter cycle: propagate every particle through the process model,
 * weight it by the Rao-Blackwellised likelihood while updating its occlusion
 * posterior, then resample (occlusion beliefs travel with their poses).
 */
inline ParticleSet step(ParticleSet set, const DepthImage& z, const std::optional<Twist>& u, double dt,
                        const MeshRaycaster& object, const FilterConfig& config)
{
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
    if (set.particles.empty()) throw std::invalid_argument("step: empty particle set");
    const CameraIntrinsics& cam = config.camera;
    detail::check_frame(z, cam);

    const std::size_t n = set.size();
    const std::size_t valid_count = count_valid(z, config.observation.max_range);
    const VisibilityTransition transition(dt, config.occlusion);

    std::vector<double> previous_log_weights(n);
    for (std::size_t l = 0; l < n; ++l)
    {
        detail::check_belief(set.particles[l], cam);
        previous_log_weights[l] = set.particles[l].log_weight;
    }
    std::vector<PixelPass> passes(n);

    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for num_threads(config.threads) schedule(dynamic, 4) if (config.threads > 1)
    for (std::int64_t li = 0; li < count; ++li)
    {
        const auto l = static_cast<std::size_t>(li);
        Particle& p = set.particles[l];
        Rng rng = make_stream(config.seed, StreamTag::propagation, set.frame, l);
        p.pose = sample_pose(p.pose, u, dt, object.centroid(), config.process, rng);
        double* belief = p.occlusion.p_vis.data();
        passes[l] = detail::evaluate_pixels(p.pose, belief, belief, z, valid_count, transition,
                                            object, cam, config.observation);
        p.log_weight += passes[l].log_likelihood;
    }

    std::vector<double> log_weights(n);
    bool any_evidence = false;
    for (std::size_t l = 0; l < n; ++l)
    {
        log_weights[l] = set.particles[l].log_weight;
        any_evidence = any_evidence || passes[l].evidence_pixels > 0;
    }
    const double max_log_weight = *std::max_element(log_weights.begin(), log_weights.end());

    StepDiagnostics diag;
    diag.tracking_lost = !any_evidence || !std::isfinite(max_log_weight);
    diag.log_evidence = log_sum_exp(log_weights) - log_sum_exp(previous_log_weights);
    const std::vector<double> weights = normalized_weights(log_weights);

    double sum_sq = 0.0, vis = 0.0, vis_weight = 0.0;
    std::size_t best = 0;
    for (std::size_t l = 0; l < n; ++l)
    {
        sum_sq += weights[l] * weights[l];
        if (weights[l] > weights[best]) best = l;
        if (passes[l].evidence_pixels > 0)
        {
            vis += weights[l] * passes[l].visibility_sum / static_cast<double>(passes[l].evidence_pixels);
            vis_weight += weights[l];
        }
    }
    diag.ess = 1.0 / sum_sq;
    diag.mean_visibility = vis_weight > 0.0 ? vis / vis_weight : 0.0;

    diag.resampled = config.ess_threshold <= 0.0 ||
                     diag.ess < config.ess_threshold * static_cast<double>(n);
    if (diag.resampled)
    {
        Rng rng = make_stream(config.seed, StreamTag::resampling, set.frame);
        const std::vector<std::size_t> ancestors = systematic_resample(weights, n, rng);
        // Particles without descendants donate their storage to the copies,
        // so resampling allocates nothing.
        std::vector<char> has_child(n, 0);
        for (std::size_t a : ancestors) has_child[a] = 1;
        std::vector<std::size_t> donors;
        for (std::size_t l = 0; l < n; ++l)
            if (!has_child[l]) donors.push_back(l);

        std::vector<Particle> next(n);
        // Ancestors come out sorted; copy into all but the first slot of a
        // group, then move the original into the first.
        std::size_t k = 0;
        while (k < n)
        {
            std::size_t end = k + 1;
            while (end < n && ancestors[end] == ancestors[k]) ++end;
            Particle& source = set.particles[ancestors[k]];
            for (std::size_t c = k + 1; c < end; ++c)
            {
                Particle& copy = set.particles[donors.back()];
                donors.pop_back();
                copy.pose = source.pose;
                copy.occlusion.p_vis.assign(source.occlusion.p_vis.begin(), source.occlusion.p_vis.end());
                next[c] = std::move(copy);
            }
            next[k] = std::move(source);
            if (ancestors[k] == best) set.mode_index = k;
            k = end;
        }
        for (auto& p : next) p.log_weight = 0.0;
        set.particles = std::move(next);
    }
    else
    {
        for (std::size_t l = 0; l < n; ++l)
            set.particles[l].log_weight = std::isfinite(log_weights[l]) ? log_weights[l] - max_log_weight
                                                                         : -std::numeric_limits<double>::infinity();
        set.mode_index = best;
    }

    set.diagnostics = diag;
    set.timestamp = z.timestamp;
    ++set.frame;
    return set;
}

/**
 * Point estimate: weighted mean translation and the weighted quaternion
 * average (principal eigenvector of sum w q q^T), or the mode particle.
 */
inline Pose estimate(const ParticleSet& set, Estimator kind = Estimator::weighted_mean)
{
    if (set.particles.empty()) throw std::invalid_argument("estimate: empty particle set");
    if (kind == Estimator::max_weight) return set.particles[std::min(set.mode_index, set.size() - 1)].pose;

    std::vector<double> log_weights(set.size());
    for (std::size_t l = 0; l < set.size(); ++l) log_weights[l] = set.particles[l].log_weight;
    const std::vector<double> w = normalized_weights(log_weights);

    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    Eigen::Matrix4d accumulator = Eigen::Matrix4d::Zero();
    std::size_t heaviest = 0;
    for (std::size_t l = 0; l < set.size(); ++l)
    {
        const Pose& p = set.particles[l].pose;
        t += w[l] * p.translation;
        const Eigen::Vector4d q = p.rotation.coeffs();
        accumulator += w[l] * q * q.transpose();
        if (w[l] > w[heaviest]) heaviest = l;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(accumulator);
    Eigen::Vector4d q = solver.eigenvectors().col(3);
    if (q.dot(set.particles[heaviest].pose.rotation.coeffs()) < 0.0) q = -q;

    Pose out;
    out.translation = t;
    out.rotation.coeffs() = q;
    out.rotation.normalize();
    return out;
}

/// Convenience owner of a running filter.
class Tracker
{
public:
    Tracker(FilterConfig config, const MeshRaycaster& object)
        : config_(std::move(config)), object_(&object), set_(initialize(config_, object))
    {
    }

    const Pose& track(const DepthImage& z, const std::optional<Twist>& u, double dt)
    {
        set_ = step(std::move(set_), z, u, dt, *object_, config_);
        estimate_ = estimate(set_, config_.estimator);
        return estimate_;
    }

    const ParticleSet& particles() const { return set_; }
    const FilterConfig& config() const { return config_; }
    const Pose& current_estimate() const { return estimate_; }

    /// Mean posterior visibility per pixel across particles.
    std::vector<double> mean_visibility_image() const
    {
        std::vector<double> out(config_.camera.pixel_count(), 0.0);
        for (const auto& p : set_.particles)
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.occlusion[i];
        for (double& x : out) x /= static_cast<double>(set_.size());
        return out;
    }

private:
    FilterConfig config_;
    const MeshRaycaster* object_;
    ParticleSet set_;
    Pose estimate_ = config_.initial_pose;
};

}  // namespace occtrack
