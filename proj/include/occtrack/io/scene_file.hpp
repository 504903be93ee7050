#pragma once

#include "occtrack/io/dataset.hpp"
#include "occtrack/simulator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace occtrack
{
/**
 * JSON scene description for the simulator.
 *
 *   {
 *     "preset": "a",                  optional starting point, see presets::by_name
 *     "seed": 7, "frame_rate": 30, "duration": 10, "record_controls": false,
 *     "camera": {"width": 128, "height": 96, "fx": 105, ...},
 *     "observation": {"sigma_m": 0.003, "k_c": 0.0015, "beta": 0.01, "m": 6},
 *     "tracked": {"mesh": {...}, "trajectory": {...}, "disturbance": {...}},
 *     "occluders": [{"mesh": {...}, "trajectory": {...}}]
 *   }
 *
 * Meshes: {"builtin": "tool"}, {"builtin": "box", "size": [x, y, z]},
 * {"builtin": "plane", "size": [w, h]} or {"obj": "path/relative/to/scene.obj"}.
 *
 * Poses: {"translation": [x, y, z], "rotation": [qw, qx, qy, qz]}.
 *
 * Trajectories ("type" selects the rest):
 *   static:         "pose"
 *   constant_twist: "start", "linear", "angular", optional "center"
 *   sinusoid:       "base", "frequency", "trans_amplitude", "rot_amplitude",
 *                   "trans_phase", "rot_phase", optional "center"
 *   waypoints:      "waypoints": [{"time": t, "pose": {...}}, ...]
 * A missing "center" defaults to the mesh centroid.
 */
namespace scene_json
{
using nlohmann::json;

inline Eigen::Vector3d vec3(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) throw DatasetError(std::string("scene: '") + what + "' must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Eigen::Vector3d vec3_or(const json& j, const char* key, const Eigen::Vector3d& fallback)
{
    return j.contains(key) ? vec3(j.at(key), key) : fallback;
}

inline Pose pose(const json& j)
{
    Pose p;
    if (j.contains("translation")) p.translation = vec3(j.at("translation"), "translation");
    if (j.contains("rotation"))
    {
        const json& q = j.at("rotation");
        if (!q.is_array() || q.size() != 4) throw DatasetError("scene: 'rotation' must be [qw, qx, qy, qz]");
        p.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                        q[3].get<double>());
        if (std::abs(p.rotation.norm() - 1.0) > 1e-6) throw DatasetError("scene: rotation is not a unit quaternion");
        p.rotation.normalize();
    }
    return p;
}

inline TriangleMesh mesh(const json& j, const std::filesystem::path& base)
{
    if (j.contains("obj"))
    {
        const std::filesystem::path path = base / j.at("obj").get<std::string>();
        std::ifstream in(path);
        if (!in) throw IoError("cannot open mesh '" + path.string() + "'");
        return parse_obj(in);
    }
    const std::string kind = j.value("builtin", std::string("tool"));
    if (kind == "tool") return make_tool();
    if (kind == "box") return make_box(vec3(j.at("size"), "size"));
    if (kind == "plane")
    {
        const json& s = j.at("size");
        if (!s.is_array() || s.size() != 2) throw DatasetError("scene: plane 'size' must be [w, h]");
        return make_plane(s[0].get<double>(), s[1].get<double>());
    }
    throw DatasetError("scene: unknown builtin mesh '" + kind + "'");
}

inline Trajectory trajectory(const json& j, const Eigen::Vector3d& centroid, double duration)
{
    const std::string type = j.at("type").get<std::string>();
    if (type == "static") return {StaticMotion{pose(j.at("pose"))}, duration};
    if (type == "constant_twist")
    {
        ConstantTwistMotion m;
        m.start = pose(j.at("start"));
        m.twist.linear = vec3_or(j, "linear", Eigen::Vector3d::Zero());
        m.twist.angular = vec3_or(j, "angular", Eigen::Vector3d::Zero());
        m.center = vec3_or(j, "center", centroid);
        return {m, duration};
    }
    if (type == "sinusoid")
    {
        SinusoidMotion m;
        m.base = pose(j.at("base"));
        m.center = vec3_or(j, "center", centroid);
        m.frequency = j.at("frequency").get<double>();
        m.trans_amplitude = vec3_or(j, "trans_amplitude", Eigen::Vector3d::Zero());
        m.rot_amplitude = vec3_or(j, "rot_amplitude", Eigen::Vector3d::Zero());
        m.trans_phase = vec3_or(j, "trans_phase", Eigen::Vector3d::Zero());
        m.rot_phase = vec3_or(j, "rot_phase", Eigen::Vector3d::Zero());
        return {m, duration};
    }
    if (type == "waypoints")
    {
        WaypointMotion m;
        for (const json& w : j.at("waypoints")) m.waypoints.push_back({w.at("time").get<double>(), pose(w.at("pose"))});
        if (m.waypoints.empty()) throw DatasetError("scene: waypoint trajectory without waypoints");
        for (std::size_t k = 1; k < m.waypoints.size(); ++k)
            if (!(m.waypoints[k].time > m.waypoints[k - 1].time))
                throw DatasetError("scene: waypoint times must increase");
        return {m, duration};
    }
    throw DatasetError("scene: unknown trajectory type '" + type + "'");
}

inline SimObject object(const json& j, const std::filesystem::path& base, double duration)
{
    SimObject o;
    o.mesh = mesh(j.value("mesh", json::object()), base);
    const Eigen::Vector3d c = o.mesh.centroid();
    o.trajectory = trajectory(j.at("trajectory"), c, duration);
    if (j.contains("disturbance")) o.disturbance = trajectory(j.at("disturbance"), c, duration);
    return o;
}
}  // namespace scene_json

/// Builds a scene from JSON; relative mesh paths resolve against \p base.
inline Scene parse_scene(const nlohmann::json& j, const std::filesystem::path& base = {})
{
    try
    {
        const std::uint64_t seed = j.value("seed", std::uint64_t{1});
        Scene s = j.contains("preset") ? presets::by_name(j.at("preset").get<std::string>(), seed) : Scene{};
        s.seed = seed;
        s.frame_rate = j.value("frame_rate", s.frame_rate);
        const double duration = j.value("duration", s.duration);
        if (duration != s.duration)
        {
            // Trajectories of a preset are re-declared over the new horizon.
            s.duration = duration;
            s.tracked.trajectory.duration = duration;
            if (s.tracked.disturbance) s.tracked.disturbance->duration = duration;
            for (auto& o : s.occluders) o.trajectory.duration = duration;
        }
        s.record_controls = j.value("record_controls", s.record_controls);
        if (j.contains("camera"))
        {
            const auto& c = j.at("camera");
            s.camera.width = c.value("width", s.camera.width);
            s.camera.height = c.value("height", s.camera.height);
            s.camera.fx = c.value("fx", s.camera.fx);
            s.camera.fy = c.value("fy", s.camera.fy);
            s.camera.cx = c.value("cx", s.camera.cx);
            s.camera.cy = c.value("cy", s.camera.cy);
            s.camera.max_range = c.value("max_range", s.camera.max_range);
            s.obs_params.max_range = s.camera.max_range;
        }
        if (j.contains("observation"))
        {
            const auto& o = j.at("observation");
            s.obs_params.sigma_m = o.value("sigma_m", s.obs_params.sigma_m);
            s.obs_params.k_c = o.value("k_c", s.obs_params.k_c);
            s.obs_params.beta = o.value("beta", s.obs_params.beta);
            s.obs_params.max_range = o.value("m", s.obs_params.max_range);
            s.camera.max_range = s.obs_params.max_range;
        }
        if (j.contains("tracked")) s.tracked = scene_json::object(j.at("tracked"), base, s.duration);
        if (j.contains("occluders"))
        {
            s.occluders.clear();
            for (const auto& o : j.at("occluders")) s.occluders.push_back(scene_json::object(o, base, s.duration));
        }
        s.validate();
        return s;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DatasetError(std::string("scene: ") + e.what());
    }
    catch (const std::invalid_argument& e)
    {
        throw DatasetError(std::string("scene: ") + e.what());
    }
}

inline Scene load_scene(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene '" + path + "'");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DatasetError(std::string("scene: ") + e.what());
    }
    return parse_scene(j, std::filesystem::path(path).parent_path());
}

}  // namespace occtrack
