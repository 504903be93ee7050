#pragma once

#include "occtrack/geometry/camera.hpp"
#include "occtrack/geometry/mesh.hpp"
#include "occtrack/geometry/pose.hpp"
#include "occtrack/geometry/ray_cast.hpp"
#include "occtrack/io/dataset.hpp"
#include "occtrack/observation.hpp"
#include "occtrack/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace occtrack
{
struct StaticMotion
{
    Pose pose;
};

/// start * exp_twist(twist, t, center).
struct ConstantTwistMotion
{
    Pose start;
    Twist twist;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/**
 * base * offset(t), where offset rotates by the rotation vector
 * rot_amplitude[k] sin(2 pi f t + rot_phase[k]) about center and translates
 * by trans_amplitude[k] sin(2 pi f t + trans_phase[k]) (body frame).
 */
struct SinusoidMotion
{
    Pose base;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d trans_amplitude = Eigen::Vector3d::Zero();  // m
    Eigen::Vector3d rot_amplitude = Eigen::Vector3d::Zero();    // rad
    Eigen::Vector3d trans_phase = Eigen::Vector3d::Zero();
    Eigen::Vector3d rot_phase = Eigen::Vector3d::Zero();
    double frequency = 0.1;  // Hz
};

struct Waypoint
{
    double time = 0.0;
    Pose pose;
};

/// Piecewise linear translation and slerp rotation; constant outside the
/// waypoint time range.
struct WaypointMotion
{
    std::vector<Waypoint> waypoints;
};

struct Trajectory
{
    std::variant<StaticMotion, ConstantTwistMotion, SinusoidMotion, WaypointMotion> motion;
    double duration = 0.0;
};

namespace detail
{
inline Pose evaluate(const StaticMotion& m, double) { return m.pose; }

inline Pose evaluate(const ConstantTwistMotion& m, double t)
{
    return compose(m.start, exp_twist(m.twist, t, m.center));
}

inline Pose evaluate(const SinusoidMotion& m, double t)
{
    const double w = 2.0 * std::numbers::pi * m.frequency * t;
    Eigen::Vector3d offset, rot;
    for (int k = 0; k < 3; ++k)
    {
        offset[k] = m.trans_amplitude[k] * std::sin(w + m.trans_phase[k]);
        rot[k] = m.rot_amplitude[k] * std::sin(w + m.rot_phase[k]);
    }
    Pose delta;
    delta.rotation = exp_so3(rot);
    delta.translation = m.center - delta.rotation * m.center + offset;
    return compose(m.base, delta);
}

inline Pose evaluate(const WaypointMotion& m, double t)
{
    const auto& w = m.waypoints;
    if (w.empty()) throw std::invalid_argument("waypoint trajectory without waypoints");
    if (t <= w.front().time) return w.front().pose;
    if (t >= w.back().time) return w.back().pose;
    const auto it = std::upper_bound(w.begin(), w.end(), t,
                                     [](double x, const Waypoint& p) { return x < p.time; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double s = (t - a.time) / (b.time - a.time);
    Pose out;
    out.translation = (1.0 - s) * a.pose.translation + s * b.pose.translation;
    out.rotation = a.pose.rotation.slerp(s, b.pose.rotation);
    out.rotation.normalize();
    return out;
}
}  // namespace detail

/// Pose along a trajectory; t must lie in [0, duration].
inline Pose pose_at(const Trajectory& traj, double t)
{
    if (!(t >= 0.0 && t <= traj.duration + 1e-9))
        throw std::out_of_range("pose_at: t = " + std::to_string(t) + " outside [0, duration]");
    return std::visit([t](const auto& m) { return detail::evaluate(m, t); }, traj.motion);
}

struct SimObject
{
    TriangleMesh mesh;
    Trajectory trajectory;
    /// Body-frame offset composed onto the trajectory but invisible to the
    /// recorded controls (e.g. the object slipping in the gripper).
    std::optional<Trajectory> disturbance;
};

struct Scene
{
    SimObject tracked;
    /// Every other surface in view, in front of the object or behind it.
    std::vector<SimObject> occluders;
    CameraIntrinsics camera;
    double frame_rate = 30.0;
    double duration = 10.0;
    ObservationParams obs_params;
    std::uint64_t seed = 1;
    bool record_controls = false;

    std::size_t frame_count() const
    {
        return static_cast<std::size_t>(std::llround(duration * frame_rate));
    }
    double frame_time(std::size_t k) const { return static_cast<double>(k) / frame_rate; }

    void validate() const
    {
        camera.validate();
        obs_params.validate_for_sampling();
        if (!(frame_rate > 0.0)) throw std::invalid_argument("scene: frame_rate must be > 0");
        if (!(duration > 0.0)) throw std::invalid_argument("scene: duration must be > 0");
        auto check = [&](const SimObject& o) {
            o.mesh.validate();
            if (o.trajectory.duration + 1e-9 < duration)
                throw std::invalid_argument("scene: trajectory shorter than the scene");
            if (o.disturbance && o.disturbance->duration + 1e-9 < duration)
                throw std::invalid_argument("scene: disturbance shorter than the scene");
        };
        check(tracked);
        for (const auto& o : occluders) check(o);
    }
};

/// Per-frame rendering of a scene without sensor noise.
struct FrameTruth
{
    std::vector<double> object_depth;  // tracked object alone, +inf on misses
    std::vector<double> scene_depth;   // nearest surface of anything, +inf on misses
    Pose object_pose;

    /// Object pixel whose ray meets another surface first.
    bool occluded(std::size_t i) const
    {
        return std::isfinite(object_depth[i]) && scene_depth[i] < object_depth[i];
    }
};

class Simulator
{
public:
    explicit Simulator(Scene scene) : scene_(std::move(scene))
    {
        scene_.validate();
        tracked_ = std::make_unique<MeshRaycaster>(scene_.tracked.mesh);
        for (const auto& o : scene_.occluders) others_.push_back(std::make_unique<MeshRaycaster>(o.mesh));
    }

    const Scene& scene() const { return scene_; }
    const MeshRaycaster& tracked_caster() const { return *tracked_; }

    /// Pose the controls describe (no disturbance).
    Pose nominal_pose(double t) const { return pose_at(scene_.tracked.trajectory, t); }

    Pose object_pose(double t) const
    {
        Pose p = nominal_pose(t);
        if (scene_.tracked.disturbance) p = compose(p, pose_at(*scene_.tracked.disturbance, t));
        return p;
    }

    FrameTruth truth(double t) const
    {
        const CameraIntrinsics& cam = scene_.camera;
        const double inf = std::numeric_limits<double>::infinity();
        FrameTruth out;
        out.object_pose = object_pose(t);
        out.object_depth.assign(cam.pixel_count(), inf);
        tracked_->for_each_hit(out.object_pose, cam, [&](std::size_t i, double d) {
            out.object_depth[i] = std::min(out.object_depth[i], d);
        });
        out.scene_depth = out.object_depth;
        for (std::size_t k = 0; k < others_.size(); ++k)
        {
            const Pose p = pose_at(scene_.occluders[k].trajectory, t);
            others_[k]->for_each_hit(p, cam, [&](std::size_t i, double d) {
                out.scene_depth[i] = std::min(out.scene_depth[i], d);
            });
        }
        return out;
    }

    /// Noisy measurement of frame k; one random stream per frame.
    DepthImage measure(std::size_t k, const FrameTruth& truth) const
    {
        const CameraIntrinsics& cam = scene_.camera;
        const double t = scene_.frame_time(k);
        Rng rng = make_stream(scene_.seed, StreamTag::simulation, k);
        DepthImage image(cam.width, cam.height, t);
        for (std::size_t i = 0; i < cam.pixel_count(); ++i)
        {
            const double b = truth.scene_depth[i];
            if (!std::isfinite(b) || b > scene_.obs_params.max_range) continue;
            image[i] = static_cast<float>(sample_measurement(b, scene_.obs_params, rng));
        }
        return image;
    }

    Twist control(std::size_t k) const
    {
        if (k == 0) return {};
        const double dt = 1.0 / scene_.frame_rate;
        const Pose rel = compose(inverse(nominal_pose(scene_.frame_time(k - 1))),
                                 nominal_pose(scene_.frame_time(k)));
        return log_twist(rel, dt, tracked_->centroid());
    }

    Dataset generate(double* occlusion_fraction = nullptr) const
    {
        Dataset data;
        data.camera = scene_.camera;
        data.has_ground_truth = true;
        data.has_controls = scene_.record_controls;
        std::size_t object_pixels = 0, occluded_pixels = 0;
        const std::size_t n = scene_.frame_count();
        data.frames.resize(n);
        for (std::size_t k = 0; k < n; ++k)
        {
            const FrameTruth truth_k = truth(scene_.frame_time(k));
            Frame& f = data.frames[k];
            f.timestamp = scene_.frame_time(k);
            f.depth = measure(k, truth_k);
            f.ground_truth = truth_k.object_pose;
            if (scene_.record_controls) f.control = control(k);
            for (std::size_t i = 0; i < truth_k.object_depth.size(); ++i)
            {
                if (!std::isfinite(truth_k.object_depth[i])) continue;
                ++object_pixels;
                if (truth_k.occluded(i)) ++occluded_pixels;
            }
        }
        if (occlusion_fraction)
            *occlusion_fraction = object_pixels ? static_cast<double>(occluded_pixels) / object_pixels : 0.0;
        return data;
    }

private:
    Scene scene_;
    std::unique_ptr<MeshRaycaster> tracked_;
    std::vector<std::unique_ptr<MeshRaycaster>> others_;
};

/// Renders the scene's depth frames and samples the sensor model on them.
inline Dataset simulate(const Scene& scene)
{
    return Simulator(scene).generate();
}

/// Scenario presets: (a) free motion by a person, (b) robot motion with
/// exact controls, (c) robot motion with an in-hand slip the controls miss.
namespace presets
{
inline Pose object_base_pose(const TriangleMesh& mesh)
{
    Pose p;
    p.rotation = exp_so3(Eigen::Vector3d(-0.55, 0.45, 0.15));
    // Centroid 0.8 m in front of the camera.
    p.translation = Eigen::Vector3d(0.0, 0.0, 0.8) - p.rotation * mesh.centroid();
    return p;
}

inline SimObject background_wall(double duration)
{
    SimObject wall;
    wall.mesh = make_plane(4.0, 3.0);
    Pose p;
    p.translation = Eigen::Vector3d(0.0, 0.0, 1.6);
    wall.trajectory = {StaticMotion{p}, duration};
    return wall;
}

inline Scene base_scene(TriangleMesh mesh, std::uint64_t seed)
{
    Scene s;
    s.tracked.mesh = std::move(mesh);
    s.camera = CameraIntrinsics::downsampled_xtion();
    s.frame_rate = 30.0;
    s.duration = 10.0;
    s.seed = seed;
    s.occluders.push_back(background_wall(s.duration));
    return s;
}

/// (a): sinusoidal motion, at most 5 cm/s and 30 deg/s, no controls.
inline Scene free_motion(std::uint64_t seed, TriangleMesh mesh = make_tool())
{
    Scene s = base_scene(std::move(mesh), seed);
    SinusoidMotion m;
    m.base = object_base_pose(s.tracked.mesh);
    m.center = s.tracked.mesh.centroid();
    m.frequency = 0.15;
    m.trans_amplitude = {0.03, 0.025, 0.03};
    m.rot_amplitude = {0.3, 0.25, 0.3};
    m.trans_phase = {0.0, 1.3, 2.1};
    m.rot_phase = {0.5, 2.6, 4.0};
    s.tracked.trajectory = {m, s.duration};
    return s;
}

inline Twist robot_twist()
{
    return {Eigen::Vector3d(0.02, 0.01, -0.01), Eigen::Vector3d(0.03, 0.06, 0.04)};
}

/// (b): constant object twist, controls recorded exactly.
inline Scene controlled_motion(std::uint64_t seed, TriangleMesh mesh = make_tool())
{
    Scene s = base_scene(std::move(mesh), seed);
    ConstantTwistMotion m;
    m.start = object_base_pose(s.tracked.mesh);
    m.center = s.tracked.mesh.centroid();
    m.twist = robot_twist();
    s.tracked.trajectory = {m, s.duration};
    s.record_controls = true;
    return s;
}

/// Slip window of preset (c): 10 frames starting at this time.
inline constexpr double kSlipStart = 4.5;
inline constexpr int kSlipFrames = 10;

/// (c): preset (b) plus an unmodelled in-hand slip of 3 cm and 0.2 rad.
inline Scene disturbed_motion(std::uint64_t seed, TriangleMesh mesh = make_tool())
{
    Scene s = controlled_motion(seed, std::move(mesh));
    const Eigen::Vector3d c = s.tracked.mesh.centroid();
    Pose slip;
    slip.rotation = exp_so3(Eigen::Vector3d(0.0, 0.0, 0.2));
    slip.translation = c - slip.rotation * c + Eigen::Vector3d(0.03, 0.0, 0.0);
    WaypointMotion w;
    w.waypoints = {{kSlipStart, Pose::identity()}, {kSlipStart + kSlipFrames / s.frame_rate, slip}};
    s.tracked.disturbance = Trajectory{w, s.duration};
    return s;
}

/// Timeline of the sweeping occluder added by with_sweeping_occluder.
struct SweepTiming
{
    double enter = 3.0;  // starts moving in
    double hold = 3.5;   // covers half the object from here
    double leave = 5.5;  // starts moving out
    double clear = 6.0;  // out of the object's silhouette
};

/// Adds a flat occluder 0.3 m in front of the object's centroid that
/// slides in from the left, covers half of the object's silhouette (at its
/// starting pose) for two seconds, and slides back out.
inline Scene with_sweeping_occluder(Scene s, SweepTiming timing = {})
{
    const Pose base = pose_at(s.tracked.trajectory, 0.0);
    const double depth = (base * s.tracked.mesh.centroid()).z() - 0.3;
    const double width = 0.3;

    // Where the rays of the object's pixels cross the plate's plane.
    std::vector<char> hit(s.camera.pixel_count(), 0);
    MeshRaycaster(s.tracked.mesh).for_each_hit(base, s.camera, [&](std::size_t i, double) { hit[i] = 1; });
    std::vector<double> xs;
    double y = 0.0;
    for (std::size_t i = 0; i < hit.size(); ++i)
        if (hit[i])
        {
            const Eigen::Vector3d r = s.camera.ray_direction(i) * depth;
            xs.push_back(r.x());
            y += r.y();
        }
    if (xs.empty()) throw std::invalid_argument("sweeping occluder: object not in view");
    y /= static_cast<double>(xs.size());
    std::sort(xs.begin(), xs.end());
    // Right edge just past half of the silhouette columns; the outside
    // position leaves a margin for the object's own motion.
    const double covering_edge = 0.5 * (xs[(xs.size() - 1) / 2] + xs[xs.size() / 2]);
    const double outside_edge = xs.front() - 0.1;

    auto at = [&](double edge) {
        Pose p;
        p.translation = Eigen::Vector3d(edge - 0.5 * width, y, depth);
        return p;
    };
    SimObject plate;
    plate.mesh = make_plane(width, 0.8);
    plate.trajectory = {WaypointMotion{{{timing.enter, at(outside_edge)},
                                        {timing.hold, at(covering_edge)},
                                        {timing.leave, at(covering_edge)},
                                        {timing.clear, at(outside_edge)}}},
                        s.duration};
    s.occluders.push_back(std::move(plate));
    return s;
}

inline Scene by_name(const std::string& name, std::uint64_t seed)
{
    if (name == "a" || name == "free") return free_motion(seed);
    if (name == "b" || name == "controlled") return controlled_motion(seed);
    if (name == "c" || name == "disturbed") return disturbed_motion(seed);
    if (name == "a-occluded") return with_sweeping_occluder(free_motion(seed));
    throw std::invalid_argument("unknown scenario preset '" + name + "'");
}
}  // namespace presets

}  // namespace occtrack
