#pragma once

#include "occtrack/filter.hpp"
#include "occtrack/io/dataset.hpp"
#include "occtrack/io/trajectory.hpp"

#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace occtrack
{
/// Dataset and configuration disagree on the image geometry.
class DimensionMismatch : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct DiagnosticsRow
{
    double timestamp = 0.0;
    StepDiagnostics step;
};

struct TrackingOutput
{
    TrajectoryRecord estimates;
    std::vector<DiagnosticsRow> diagnostics;
};

/// Called after every frame with the frame index and the tracker state.
using FrameObserver = std::function<void(std::size_t, const Tracker&)>;

/**
 * Runs the filter over every frame of a dataset: one step and one estimate
 * per frame. The first frame is integrated over the nominal frame period.
 * Controls are passed whenever the dataset carries them; the process model
 * ignores them in random-walk mode.
 */
inline TrackingOutput run_tracking(const Dataset& data, const MeshRaycaster& object, const FilterConfig& config,
                                   const FrameObserver& observer = {})
{
    if (!(config.camera == data.camera))
        throw DimensionMismatch("dataset intrinsics differ from the configured camera");
    if (data.frames.empty()) return {};

    Tracker tracker(config, object);
    TrackingOutput out;
    out.estimates.reserve(data.frames.size());
    out.diagnostics.reserve(data.frames.size());
    const double period =
        data.frames.size() > 1 ? data.frames[1].timestamp - data.frames[0].timestamp : 1.0 / 30.0;
    for (std::size_t k = 0; k < data.frames.size(); ++k)
    {
        const Frame& f = data.frames[k];
        const double dt = k == 0 ? period : f.timestamp - data.frames[k - 1].timestamp;
        const Pose& pose = tracker.track(f.depth, f.control, dt);
        out.estimates.push_back({f.timestamp, pose});
        out.diagnostics.push_back({f.timestamp, tracker.particles().diagnostics});
        if (observer) observer(k, tracker);
    }
    return out;
}

inline void write_diagnostics_csv(std::ostream& out, const std::vector<DiagnosticsRow>& rows)
{
    out << "timestamp,log_evidence,ess,mean_p_vis,tracking_lost\n";
    char line[256];
    for (const auto& r : rows)
    {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%d\n", r.timestamp, r.step.log_evidence,
                      r.step.ess, r.step.mean_visibility, r.step.tracking_lost ? 1 : 0);
        out << line;
    }
}

}  // namespace occtrack
