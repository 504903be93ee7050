#pragma once

#include "occtrack/geometry/pose.hpp"
#include "occtrack/io/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace occtrack
{
/// Estimate and reference rows do not line up in time.
class TimestampMismatch : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kTimestampTolerance = 1e-6;

struct FrameError
{
    double timestamp = 0.0;
    double translation = 0.0;  // m
    double rotation = 0.0;     // rad, geodesic
    bool lost = false;
};

struct ErrorSummary
{
    std::size_t frames = 0;
    double median_translation = 0.0;
    double p95_translation = 0.0;
    double max_translation = 0.0;
    double median_rotation = 0.0;
    double p95_rotation = 0.0;
    double max_rotation = 0.0;
    double loss_fraction = 0.0;
};

struct MetricsReport
{
    double loss_threshold = 0.05;
    std::vector<FrameError> frames;
    ErrorSummary summary;
};

/// Percentile with linear interpolation between order statistics, q in [0, 1].
inline double percentile(std::vector<double> values, double q)
{
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

inline ErrorSummary summarize(const std::vector<FrameError>& frames)
{
    ErrorSummary s;
    s.frames = frames.size();
    if (frames.empty()) return s;
    std::vector<double> t, r;
    std::size_t lost = 0;
    for (const auto& f : frames)
    {
        t.push_back(f.translation);
        r.push_back(f.rotation);
        if (f.lost) ++lost;
    }
    s.median_translation = median(t);
    s.p95_translation = percentile(t, 0.95);
    s.max_translation = *std::max_element(t.begin(), t.end());
    s.median_rotation = median(r);
    s.p95_rotation = percentile(r, 0.95);
    s.max_rotation = *std::max_element(r.begin(), r.end());
    s.loss_fraction = static_cast<double>(lost) / static_cast<double>(frames.size());
    return s;
}

/**
 * Per-frame translation and geodesic rotation error. A frame counts as lost
 * when its translation error exceeds \p loss_threshold.
 */
inline MetricsReport evaluate_trajectory(const TrajectoryRecord& estimate, const TrajectoryRecord& truth,
                                         double loss_threshold = 0.05)
{
    if (estimate.size() != truth.size())
        throw TimestampMismatch("trajectories have " + std::to_string(estimate.size()) + " and " +
                                std::to_string(truth.size()) + " rows");
    if (!(loss_threshold > 0.0)) throw std::invalid_argument("loss threshold must be > 0");
    MetricsReport report;
    report.loss_threshold = loss_threshold;
    report.frames.reserve(estimate.size());
    for (std::size_t k = 0; k < estimate.size(); ++k)
    {
        if (std::abs(estimate[k].timestamp - truth[k].timestamp) > kTimestampTolerance)
            throw TimestampMismatch("row " + std::to_string(k + 1) + ": timestamps differ");
        FrameError e;
        e.timestamp = truth[k].timestamp;
        e.translation = translation_distance(estimate[k].pose, truth[k].pose);
        e.rotation = geodesic_angle(estimate[k].pose, truth[k].pose);
        e.lost = e.translation > loss_threshold;
        report.frames.push_back(e);
    }
    report.summary = summarize(report.frames);
    return report;
}

inline void write_metrics_csv(std::ostream& out, const MetricsReport& report)
{
    out << "timestamp,translation_error,rotation_error,lost\n";
    char line[256];
    for (const auto& f : report.frames)
    {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d\n", f.timestamp, f.translation, f.rotation,
                      f.lost ? 1 : 0);
        out << line;
    }
}

inline std::string format_summary(const MetricsReport& report)
{
    const ErrorSummary& s = report.summary;
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "frames               %zu\n"
                  "translation median   %.6f m\n"
                  "translation p95      %.6f m\n"
                  "translation max      %.6f m\n"
                  "rotation median      %.6f rad (%.3f deg)\n"
                  "rotation p95         %.6f rad (%.3f deg)\n"
                  "rotation max         %.6f rad (%.3f deg)\n"
                  "tracking loss        %.4f (threshold %.3f m)\n",
                  s.frames, s.median_translation, s.p95_translation, s.max_translation, s.median_rotation,
                  s.median_rotation * 180.0 / M_PI, s.p95_rotation, s.p95_rotation * 180.0 / M_PI,
                  s.max_rotation, s.max_rotation * 180.0 / M_PI, s.loss_fraction, report.loss_threshold);
    return buf;
}

}  // namespace occtrack
