#pragma once

#include "occtrack/filter.hpp"
#include "occtrack/io/dataset.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace occtrack
{
/// Unknown key, unparsable value, or a value that fails validation.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig
{
    FilterConfig filter;
    /// Whether the file set any [camera] key; if not, the dataset's
    /// intrinsics are used as they are.
    bool camera_given = false;
    /// Whether [filter] initial_pose was set; if not, tracking starts from the
    /// dataset's first ground-truth pose.
    bool initial_pose_given = false;
    bool max_range_given = false;
    bool m_given = false;
};

namespace detail
{
inline std::string trim(std::string s)
{
    auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
    return s;
}

inline double parse_double(const std::string& raw, const std::string& what)
{
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
        throw ConfigError(what + ": expected a number, got '" + raw + "'");
    return v;
}

inline long long parse_integer(const std::string& raw, const std::string& what)
{
    const std::string s = trim(raw);
    long long v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
        throw ConfigError(what + ": expected an integer, got '" + raw + "'");
    return v;
}

/// "tx ty tz qw qx qy qz", separated by blanks or commas.
inline Pose parse_pose(const std::string& raw, const std::string& what)
{
    std::string s = raw;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<double> v;
    std::string token;
    while (in >> token) v.push_back(parse_double(token, what));
    if (v.size() != 7) throw ConfigError(what + ": expected 7 numbers (tx ty tz qw qx qy qz)");
    Pose p;
    p.translation = {v[0], v[1], v[2]};
    p.rotation = Eigen::Quaterniond(v[3], v[4], v[5], v[6]);
    if (std::abs(p.rotation.norm() - 1.0) > 1e-6) throw ConfigError(what + ": quaternion is not unit length");
    p.rotation.normalize();
    return p;
}

struct ConfigKey
{
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

inline const std::vector<ConfigKey>& config_keys()
{
    using S = const std::string&;
    static const std::vector<ConfigKey> keys = {
        {"observation", "sigma_m", [](RunConfig& c, S v, S w) { c.filter.observation.sigma_m = parse_double(v, w); }},
        {"observation", "k_c", [](RunConfig& c, S v, S w) { c.filter.observation.k_c = parse_double(v, w); }},
        {"observation", "beta", [](RunConfig& c, S v, S w) { c.filter.observation.beta = parse_double(v, w); }},
        {"observation", "m",
         [](RunConfig& c, S v, S w) {
             c.filter.observation.max_range = parse_double(v, w);
             c.m_given = true;
         }},
        {"observation", "lambda", [](RunConfig& c, S v, S w) { c.filter.observation.lambda = parse_double(v, w); }},

        {"occlusion", "p_vis_given_vis",
         [](RunConfig& c, S v, S w) { c.filter.occlusion.p_vis_given_vis = parse_double(v, w); }},
        {"occlusion", "p_vis_given_occ",
         [](RunConfig& c, S v, S w) { c.filter.occlusion.p_vis_given_occ = parse_double(v, w); }},
        {"occlusion", "reference_dt",
         [](RunConfig& c, S v, S w) { c.filter.occlusion.reference_dt = parse_double(v, w); }},
        {"occlusion", "initial_p_vis",
         [](RunConfig& c, S v, S w) { c.filter.occlusion.initial_p_vis = parse_double(v, w); }},

        {"process", "trans_sigma", [](RunConfig& c, S v, S w) { c.filter.process.trans_sigma = parse_double(v, w); }},
        {"process", "rot_sigma", [](RunConfig& c, S v, S w) { c.filter.process.rot_sigma = parse_double(v, w); }},
        {"process", "trans_sigma_ctrl",
         [](RunConfig& c, S v, S w) { c.filter.process.trans_sigma_ctrl = parse_double(v, w); }},
        {"process", "rot_sigma_ctrl",
         [](RunConfig& c, S v, S w) { c.filter.process.rot_sigma_ctrl = parse_double(v, w); }},
        {"process", "mode",
         [](RunConfig& c, S v, S w) {
             try
             {
                 c.filter.process.mode = parse_process_mode(trim(v));
             }
             catch (const std::invalid_argument& e)
             {
                 throw ConfigError(w + ": " + e.what());
             }
         }},

        {"filter", "particle_count",
         [](RunConfig& c, S v, S w) { c.filter.particle_count = static_cast<int>(parse_integer(v, w)); }},
        {"filter", "seed",
         [](RunConfig& c, S v, S w) {
             const long long s = parse_integer(v, w);
             if (s < 0) throw ConfigError(w + ": seed must be >= 0");
             c.filter.seed = static_cast<std::uint64_t>(s);
         }},
        {"filter", "init_trans_sigma", [](RunConfig& c, S v, S w) { c.filter.init_trans_sigma = parse_double(v, w); }},
        {"filter", "init_rot_sigma", [](RunConfig& c, S v, S w) { c.filter.init_rot_sigma = parse_double(v, w); }},
        {"filter", "initial_pose",
         [](RunConfig& c, S v, S w) {
             c.filter.initial_pose = parse_pose(v, w);
             c.initial_pose_given = true;
         }},
        {"filter", "ess_threshold", [](RunConfig& c, S v, S w) { c.filter.ess_threshold = parse_double(v, w); }},
        {"filter", "estimator",
         [](RunConfig& c, S v, S w) {
             const std::string s = trim(v);
             if (s == "weighted_mean") c.filter.estimator = Estimator::weighted_mean;
             else if (s == "max_weight") c.filter.estimator = Estimator::max_weight;
             else throw ConfigError(w + ": expected weighted_mean or max_weight");
         }},
        {"filter", "threads", [](RunConfig& c, S v, S w) { c.filter.threads = static_cast<int>(parse_integer(v, w)); }},

        {"camera", "width",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.width = static_cast<int>(parse_integer(v, w));
             c.camera_given = true;
         }},
        {"camera", "height",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.height = static_cast<int>(parse_integer(v, w));
             c.camera_given = true;
         }},
        {"camera", "fx",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.fx = parse_double(v, w);
             c.camera_given = true;
         }},
        {"camera", "fy",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.fy = parse_double(v, w);
             c.camera_given = true;
         }},
        {"camera", "cx",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.cx = parse_double(v, w);
             c.camera_given = true;
         }},
        {"camera", "cy",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.cy = parse_double(v, w);
             c.camera_given = true;
         }},
        {"camera", "max_range",
         [](RunConfig& c, S v, S w) {
             c.filter.camera.max_range = parse_double(v, w);
             c.camera_given = true;
             c.max_range_given = true;
         }},
    };
    return keys;
}

inline const ConfigKey* find_key(const std::string& section, const std::string& key)
{
    for (const auto& k : config_keys())
        if (section == k.section && key == k.key) return &k;
    return nullptr;
}

inline std::string env_name(const ConfigKey& k)
{
    std::string name = std::string("OCCTRACK_") + k.section + "_" + k.key;
    for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return name;
}

/// The sensor range appears twice (observation m, camera max_range); a value
/// given for one is copied to the other.
inline void reconcile_range(RunConfig& c)
{
    if (c.m_given && !c.max_range_given) c.filter.camera.max_range = c.filter.observation.max_range;
    if (c.max_range_given && !c.m_given) c.filter.observation.max_range = c.filter.camera.max_range;
}
}  // namespace detail

/// Environment variable that overrides [section] key, e.g. OCCTRACK_FILTER_SEED.
inline std::string config_env_name(const std::string& section, const std::string& key)
{
    const detail::ConfigKey* k = detail::find_key(section, key);
    if (!k) throw ConfigError("unknown config key [" + section + "] " + key);
    return detail::env_name(*k);
}

using EnvLookup = std::function<const char*(const char*)>;

/**
 * Applies OCCTRACK_<SECTION>_<KEY> overrides. \p lookup defaults to
 * std::getenv.
 */
inline void apply_env_overrides(RunConfig& config, const EnvLookup& lookup = {})
{
    for (const auto& k : detail::config_keys())
    {
        const std::string name = detail::env_name(k);
        const char* value = lookup ? lookup(name.c_str()) : std::getenv(name.c_str());
        if (value) k.set(config, value, name);
    }
    detail::reconcile_range(config);
}

/// Parses INI text. Missing keys keep their defaults; unknown sections or
/// keys are errors. Comments must sit on their own line.
inline RunConfig parse_config(std::istream& in, RunConfig base = {})
{
    boost::property_tree::ptree tree;
    try
    {
        boost::property_tree::ini_parser::read_ini(in, tree);
    }
    catch (const boost::property_tree::ini_parser_error& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, entries] : tree)
    {
        if (!entries.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
        for (const auto& [key, value] : entries)
        {
            const detail::ConfigKey* k = detail::find_key(section, key);
            if (!k) throw ConfigError("config: unknown key [" + section + "] " + key);
            k->set(base, value.data(), "[" + section + "] " + key);
        }
    }
    detail::reconcile_range(base);
    return base;
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse_config(in);
}

/// INI text for a configuration; parse_config of the result reproduces it.
inline std::string format_config(const RunConfig& c)
{
    const FilterConfig& f = c.filter;
    std::ostringstream out;
    out.precision(17);
    out << "[observation]\n"
        << "sigma_m = " << f.observation.sigma_m << "\n"
        << "k_c = " << f.observation.k_c << "\n"
        << "beta = " << f.observation.beta << "\n"
        << "m = " << f.observation.max_range << "\n"
        << "lambda = " << f.observation.lambda << "\n\n"
        << "[occlusion]\n"
        << "p_vis_given_vis = " << f.occlusion.p_vis_given_vis << "\n"
        << "p_vis_given_occ = " << f.occlusion.p_vis_given_occ << "\n"
        << "reference_dt = " << f.occlusion.reference_dt << "\n"
        << "initial_p_vis = " << f.occlusion.initial_p_vis << "\n\n"
        << "[process]\n"
        << "trans_sigma = " << f.process.trans_sigma << "\n"
        << "rot_sigma = " << f.process.rot_sigma << "\n"
        << "trans_sigma_ctrl = " << f.process.trans_sigma_ctrl << "\n"
        << "rot_sigma_ctrl = " << f.process.rot_sigma_ctrl << "\n"
        << "mode = " << to_string(f.process.mode) << "\n\n"
        << "[filter]\n"
        << "particle_count = " << f.particle_count << "\n"
        << "seed = " << f.seed << "\n"
        << "init_trans_sigma = " << f.init_trans_sigma << "\n"
        << "init_rot_sigma = " << f.init_rot_sigma << "\n";
    if (c.initial_pose_given)
    {
        const Pose& p = f.initial_pose;
        out << "initial_pose = " << p.translation.x() << " " << p.translation.y() << " " << p.translation.z()
            << " " << p.rotation.w() << " " << p.rotation.x() << " " << p.rotation.y() << " " << p.rotation.z()
            << "\n";
    }
    out << "ess_threshold = " << f.ess_threshold << "\n"
        << "estimator = " << (f.estimator == Estimator::max_weight ? "max_weight" : "weighted_mean") << "\n"
        << "threads = " << f.threads << "\n";
    if (c.camera_given)
    {
        out << "\n[camera]\n"
            << "width = " << f.camera.width << "\n"
            << "height = " << f.camera.height << "\n"
            << "fx = " << f.camera.fx << "\n"
            << "fy = " << f.camera.fy << "\n"
            << "cx = " << f.camera.cx << "\n"
            << "cy = " << f.camera.cy << "\n"
            << "max_range = " << f.camera.max_range << "\n";
    }
    return out.str();
}

}  // namespace occtrack
