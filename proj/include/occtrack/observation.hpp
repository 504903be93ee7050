#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace occtrack
{
/**
 * \brief Parameters of the per-pixel depth beam model.
 *
 * sigma_m blurs the predicted depth for object-model error, the camera
 * noise grows with the depth squared (sigma_c = k_c d^2), beta is the weight
 * of the uniform outlier tail over (0, max_range), and lambda is the rate of
 * the exponential prior on the depth of an occluding surface.
 */
struct ObservationParams
{
    double sigma_m = 0.003;
    double k_c = 0.0015;
    double beta = 0.01;
    double max_range = 6.0;
    double lambda = std::numbers::ln2;

    void validate() const
    {
        validate_for_sampling();
        if (!(k_c > 0.0)) throw std::invalid_argument("observation: k_c must be > 0");
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("observation: lambda must be > 0");
    }

    /// The generative side tolerates a noiseless camera (k_c = 0).
    void validate_for_sampling() const
    {
        if (!(sigma_m >= 0.0) || !std::isfinite(sigma_m))
            throw std::invalid_argument("observation: sigma_m must be >= 0");
        if (!(k_c >= 0.0) || !std::isfinite(k_c))
            throw std::invalid_argument("observation: k_c must be >= 0");
        if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("observation: beta must be in [0, 1)");
        if (!(max_range > 0.0) || !std::isfinite(max_range))
            throw std::invalid_argument("observation: max range m must be > 0");
    }
};

/// Occluder rate such that half of all beams travel \p half_life without hitting anything.
inline double lambda_from_half_life(double half_life)
{
    if (!(half_life > 0.0)) throw std::invalid_argument("half-life must be > 0");
    return std::numbers::ln2 / half_life;
}

inline double sigma_c(double d, const ObservationParams& params)
{
    return params.k_c * d * d;
}

namespace detail
{
inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

inline double normal_pdf(double x, double mean, double sigma)
{
    const double r = (x - mean) / sigma;
    return kInvSqrt2Pi / sigma * std::exp(-0.5 * r * r);
}

inline double normal_cdf(double x)
{
    // erfc has already saturated to exactly 0 or 2 at these arguments.
    if (x < -40.0) return 0.0;
    if (x > 40.0) return 1.0;
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline void check_measurement(double z, double d, const ObservationParams& params)
{
    if (!(std::isfinite(z) && z > 0.0 && z <= params.max_range))
        throw std::invalid_argument("depth measurement outside (0, m]: " + std::to_string(z));
    if (!(d > 0.0) || !std::isfinite(d))
        throw std::invalid_argument("predicted depth must be > 0: " + std::to_string(d));
}

inline double tail_density(double z, const ObservationParams& params)
{
    return (z > 0.0 && z < params.max_range) ? params.beta / params.max_range : 0.0;
}

// Beyond this many standard deviations the Gaussian terms are below double
// precision relative to the rest of the density.
inline constexpr double kNegligibleSigmas = 40.0;
}  // namespace detail

/**
 * p(z | d, visible): the object surface at predicted depth \p d is seen,
 * blurred by model error and camera noise, plus the uniform outlier tail.
 */
inline double lik_visible(double z, double d, const ObservationParams& params)
{
    detail::check_measurement(z, d, params);
    const double sc = sigma_c(d, params);
    const double sigma = std::sqrt(sc * sc + params.sigma_m * params.sigma_m);
    double gauss = 0.0;
    if (std::abs(z - d) < detail::kNegligibleSigmas * sigma) gauss = detail::normal_pdf(z, d, sigma);
    return (1.0 - params.beta) * gauss + detail::tail_density(z, params);
}

/**
 * p(z | d, occluded): some surface in front of the object, distributed as an
 * exponential truncated to (0, d), is seen through camera noise, plus the
 * outlier tail. Closed form of the exponential/Gaussian convolution.
 */
inline double lik_occluded(double z, double d, const ObservationParams& params)
{
    detail::check_measurement(z, d, params);
    const double sigma = sigma_c(d, params);
    const double lambda = params.lambda;
    const double tail = detail::tail_density(z, params);

    // Support of the occluder depth is (0, d): the convolution vanishes once
    // z is far outside it.
    if (z > d + detail::kNegligibleSigmas * sigma) return tail;

    const double ld = lambda * d;
    double normalizer;  // lambda / (1 - exp(-lambda d))
    if (ld < 1e-8)
        normalizer = (1.0 + 0.5 * ld) / d;
    else
        normalizer = lambda / -std::expm1(-ld);

    const double shift = lambda * sigma * sigma;
    const double hi = (d - z + shift) / sigma;
    const double lo = (-z + shift) / sigma;
    const double mass = detail::normal_cdf(hi) - detail::normal_cdf(lo);
    const double gauss = normalizer * std::exp(0.5 * lambda * shift - lambda * z) * mass;
    return (1.0 - params.beta) * gauss + tail;
}

/// Pixel likelihood with the occlusion variable summed out. Rays that miss
/// the object model get the constant background density 1/m.
inline double pixel_marginal(double z, std::optional<double> d, double p_visible,
                             const ObservationParams& params)
{
    if (!(p_visible >= 0.0 && p_visible <= 1.0))
        throw std::invalid_argument("visibility probability outside [0, 1]");
    if (!d)
    {
        detail::check_measurement(z, 1.0, params);
        return 1.0 / params.max_range;
    }
    return p_visible * lik_visible(z, *d, params) + (1.0 - p_visible) * lik_occluded(z, *d, params);
}

/**
 * Draws a depth reading of a surface at \p b: with probability beta a
 * uniform outlier on (0, m), otherwise Normal(b, sigma_c(b)) restricted to
 * (0, m] by rejection.
 */
template <typename Rng>
double sample_measurement(double b, const ObservationParams& params, Rng& rng)
{
    if (!(b > 0.0 && b <= params.max_range))
        throw std::invalid_argument("surface depth outside (0, m]: " + std::to_string(b));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (params.beta > 0.0 && unit(rng) < params.beta)
    {
        double z = 0.0;
        while (!(z > 0.0)) z = unit(rng) * params.max_range;
        return z;
    }
    const double sigma = sigma_c(b, params);
    if (sigma == 0.0) return b;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;)
    {
        const double z = b + sigma * normal(rng);
        if (z > 0.0 && z <= params.max_range) return z;
    }
}

}  // namespace occtrack
