#pragma once

#include "occtrack/geometry/camera.hpp"
#include "occtrack/observation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace occtrack
{
/// Two-state visibility chain, specified for a reference time step.
struct OcclusionParams
{
    double p_vis_given_vis = 0.9;
    double p_vis_given_occ = 0.3;
    double reference_dt = 1.0;
    double initial_p_vis = 0.5;

    void validate() const
    {
        auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!is_prob(p_vis_given_vis) || !is_prob(p_vis_given_occ) || !is_prob(initial_p_vis))
            throw std::invalid_argument("occlusion: probabilities must lie in [0, 1]");
        if (!(reference_dt > 0.0) || !std::isfinite(reference_dt))
            throw std::invalid_argument("occlusion: reference_dt must be > 0");
        // Second eigenvalue of the chain; fractional powers need it in [0, 1].
        if (p_vis_given_vis < p_vis_given_occ)
            throw std::invalid_argument("occlusion: p_vis_given_vis must be >= p_vis_given_occ");
    }
};

/// Lower and upper clamp of a posterior visibility.
inline constexpr double kVisibilityFloor = 1e-12;
inline constexpr double kVisibilityCeil = 1.0 - 1e-12;

/**
 * \brief The chain's transition matrix raised to the power dt / reference_dt.
 *
 * With second eigenvalue g = p(v|v) - p(v|o) the k-step matrix is
 * p(v|v)_k = 1 - (1 - p(v|v)) f_k and p(v|o)_k = p(v|o) f_k where
 * f_k = (1 - g^k) / (1 - g).
 */
struct VisibilityTransition
{
    double stay_visible = 1.0;    // p(visible now | visible before)
    double become_visible = 0.0;  // p(visible now | occluded before)

    VisibilityTransition() = default;

    VisibilityTransition(double dt, const OcclusionParams& params)
    {
        if (!(dt >= 0.0)) throw std::invalid_argument("propagate_visibility: dt must be >= 0");
        const double k = dt / params.reference_dt;
        const double g = params.p_vis_given_vis - params.p_vis_given_occ;
        double f;
        if (g >= 1.0)
            f = k;  // identity chain; both offsets below vanish
        else
            f = (1.0 - std::pow(g, k)) / (1.0 - g);
        stay_visible = 1.0 - (1.0 - params.p_vis_given_vis) * f;
        become_visible = params.p_vis_given_occ * f;
    }

    double operator()(double p_vis) const
    {
        return p_vis * stay_visible + (1.0 - p_vis) * become_visible;
    }
};

/// Prior visibility after dt seconds of the occlusion process.
inline double propagate_visibility(double p_vis, double dt, const OcclusionParams& params)
{
    if (!(p_vis >= 0.0 && p_vis <= 1.0))
        throw std::invalid_argument("propagate_visibility: probability outside [0, 1]");
    return VisibilityTransition(dt, params)(p_vis);
}

/// Bayes update of a propagated visibility prior with the two branch likelihoods.
inline double visibility_posterior(double p_prior, double lik_vis, double lik_occ)
{
    const double num = p_prior * lik_vis;
    const double den = num + (1.0 - p_prior) * lik_occ;
    if (!(den > 0.0)) return p_prior;
    return std::clamp(num / den, kVisibilityFloor, kVisibilityCeil);
}

/**
 * Posterior probability that the object is visible in a pixel, given its
 * previous posterior, the new measurement \p z (NaN when invalid) and the
 * predicted object depth (absent when the ray misses the model). Without
 * usable evidence the propagated prior is returned unchanged.
 */
inline double update_visibility(double p_vis_prev, double z, std::optional<double> d, double dt,
                                const ObservationParams& obs, const OcclusionParams& occ)
{
    const double prior = propagate_visibility(p_vis_prev, dt, occ);
    if (!d || !is_valid_depth(z, obs.max_range)) return prior;
    return visibility_posterior(prior, lik_visible(z, *d, obs), lik_occluded(z, *d, obs));
}

/// Per-pixel visibility probabilities p(o^i = 0 | ...) of one pose hypothesis.
struct OcclusionBelief
{
    std::vector<double> p_vis;

    OcclusionBelief() = default;
    OcclusionBelief(std::size_t pixels, double initial) : p_vis(pixels, initial) {}

    std::size_t size() const { return p_vis.size(); }
    double operator[](std::size_t i) const { return p_vis[i]; }
    double& operator[](std::size_t i) { return p_vis[i]; }

    friend bool operator==(const OcclusionBelief&, const OcclusionBelief&) = default;
};

}  // namespace occtrack
