#pragma once

#include "occtrack/geometry/pose.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace occtrack
{
enum class ProcessMode
{
    random_walk,
    controlled,
};

inline std::string to_string(ProcessMode mode)
{
    return mode == ProcessMode::controlled ? "controlled" : "random_walk";
}

inline ProcessMode parse_process_mode(const std::string& s)
{
    if (s == "random_walk") return ProcessMode::random_walk;
    if (s == "controlled") return ProcessMode::controlled;
    throw std::invalid_argument("unknown process mode '" + s + "'");
}

/// Noise densities of the pose process models. Displacement standard
/// deviations grow with sqrt(dt).
struct ProcessParams
{
    double trans_sigma = 0.02;       // m / sqrt(s)
    double rot_sigma = 0.2;          // rad / sqrt(s)
    double trans_sigma_ctrl = 0.005; // m / sqrt(s)
    double rot_sigma_ctrl = 0.05;    // rad / sqrt(s)
    ProcessMode mode = ProcessMode::random_walk;

    void validate() const
    {
        for (double s : {trans_sigma, rot_sigma, trans_sigma_ctrl, rot_sigma_ctrl})
            if (!(s >= 0.0) || !std::isfinite(s))
                throw std::invalid_argument("process: sigmas must be finite and >= 0");
    }
};

namespace detail
{
template <typename Rng>
Eigen::Vector3d standard_normal3(Rng& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector3d v;
    // Explicit sequencing: argument evaluation order is unspecified.
    v.x() = n(rng);
    v.y() = n(rng);
    v.z() = n(rng);
    return v;
}
}  // namespace detail

/**
 * Body-frame perturbation with isotropic Gaussian translation (std dev
 * \p trans_std per axis) and a Gaussian rotation vector (std dev
 * \p rot_std per axis) applied about \p center.
 */
template <typename Rng>
Pose sample_perturbation(double trans_std, double rot_std, const Eigen::Vector3d& center, Rng& rng)
{
    const Eigen::Vector3d dt = trans_std * detail::standard_normal3(rng);
    const Eigen::Vector3d dr = rot_std * detail::standard_normal3(rng);
    Pose p;
    p.rotation = exp_so3(dr);
    p.translation = center - p.rotation * center + dt;
    return p;
}

/// Gaussian random walk for an object moved by an unobserved agent.
template <typename Rng>
Pose sample_random_walk(const Pose& pose, double dt, const Eigen::Vector3d& center,
                        const ProcessParams& params, Rng& rng)
{
    if (!(dt > 0.0)) throw std::invalid_argument("sample_random_walk: dt must be > 0");
    const double root = std::sqrt(dt);
    const Pose perturbation =
        sample_perturbation(params.trans_sigma * root, params.rot_sigma * root, center, rng);
    if (params.trans_sigma == 0.0 && params.rot_sigma == 0.0) return pose;
    return compose(pose, perturbation);
}

/// Integrates a known object twist with Gaussian velocity noise.
template <typename Rng>
Pose sample_controlled(const Pose& pose, const Twist& u, double dt, const Eigen::Vector3d& center,
                       const ProcessParams& params, Rng& rng)
{
    if (!(dt > 0.0)) throw std::invalid_argument("sample_controlled: dt must be > 0");
    if (!u.is_finite()) throw std::invalid_argument("sample_controlled: non-finite twist");
    // Velocity noise std dev sigma / sqrt(dt) gives displacement std dev sigma * sqrt(dt).
    const double root = std::sqrt(dt);
    Twist noisy = u;
    noisy.linear += (params.trans_sigma_ctrl / root) * detail::standard_normal3(rng);
    noisy.angular += (params.rot_sigma_ctrl / root) * detail::standard_normal3(rng);
    return compose(pose, exp_twist(noisy, dt, center));
}

/// Chooses the process model: controls are used only in controlled mode.
template <typename Rng>
Pose sample_pose(const Pose& pose, const std::optional<Twist>& u, double dt,
                 const Eigen::Vector3d& center, const ProcessParams& params, Rng& rng)
{
    if (params.mode == ProcessMode::controlled && u)
        return sample_controlled(pose, *u, dt, center, params, rng);
    return sample_random_walk(pose, dt, center, params, rng);
}

}  // namespace occtrack
