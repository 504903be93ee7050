#include "occtrack/simulator.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace occtrack;

namespace
{
Scene short_scene(Scene s, double duration)
{
    s.duration = duration;
    return s;
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

bool same_image(const DepthImage& a, const DepthImage& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
    return true;
}
}  // namespace

TEST(Trajectory, StaticAndRange)
{
    Pose p;
    p.translation = {1.0, 2.0, 3.0};
    const Trajectory t{StaticMotion{p}, 2.0};
    EXPECT_EQ(pose_at(t, 1.3).translation, p.translation);
    EXPECT_NO_THROW(pose_at(t, 2.0));
    EXPECT_THROW(pose_at(t, 2.1), std::out_of_range);
    EXPECT_THROW(pose_at(t, -0.1), std::out_of_range);
}

TEST(Trajectory, ConstantTwistIsSelfConsistent)
{
    ConstantTwistMotion m;
    m.start.translation = {0.0, 0.0, 0.8};
    m.twist = presets::robot_twist();
    m.center = {0.01, 0.02, 0.03};
    const Trajectory t{m, 10.0};
    EXPECT_LT(translation_distance(pose_at(t, 0.0), m.start), 1e-15);
    const double dt = 1.0 / 30.0;
    for (double s : {0.0, 1.0, 4.7, 9.9})
    {
        const Pose next = compose(pose_at(t, s), exp_twist(m.twist, dt, m.center));
        EXPECT_LT(translation_distance(next, pose_at(t, s + dt)), 1e-9);
        EXPECT_LT(geodesic_angle(next, pose_at(t, s + dt)), 1e-9);
    }
}

TEST(Trajectory, SinusoidStartsAtBaseWithZeroPhase)
{
    SinusoidMotion m;
    m.base.translation = {0.1, 0.0, 0.7};
    m.trans_amplitude = {0.02, 0.02, 0.02};
    m.rot_amplitude = {0.3, 0.3, 0.3};
    m.frequency = 0.5;
    const Trajectory t{m, 4.0};
    EXPECT_LT(translation_distance(pose_at(t, 0.0), m.base), 1e-15);
    // Quarter period: full amplitude on every axis.
    const Pose q = pose_at(t, 0.5);
    EXPECT_LT((q.translation - m.base.translation - Eigen::Vector3d(0.02, 0.02, 0.02)).norm(), 1e-12);
    EXPECT_NEAR(geodesic_angle(q, m.base), 0.3 * std::sqrt(3.0), 1e-12);
}

TEST(Trajectory, WaypointsInterpolate)
{
    Pose a, b;
    b.translation = {0.2, 0.0, 0.0};
    b.rotation = exp_so3(Eigen::Vector3d(0.0, 0.0, 1.0));
    const Trajectory t{WaypointMotion{{{1.0, a}, {2.0, b}}}, 3.0};
    EXPECT_EQ(pose_at(t, 0.5).translation, a.translation);
    EXPECT_EQ(pose_at(t, 2.5).translation, b.translation);
    const Pose mid = pose_at(t, 1.5);
    EXPECT_NEAR(mid.translation.x(), 0.1, 1e-15);
    EXPECT_NEAR(geodesic_angle(mid, a), 0.5, 1e-12);
}

TEST(Simulator, NoiselessFramesEqualRenderedDepth)
{
    Scene s = short_scene(presets::with_sweeping_occluder(presets::free_motion(1)), 5.0);
    s.obs_params.beta = 0.0;
    s.obs_params.k_c = 0.0;
    const Simulator sim(s);
    const Dataset data = sim.generate();
    const std::vector<MeshRaycaster> casters = [&] {
        std::vector<MeshRaycaster> out;
        out.emplace_back(s.tracked.mesh);
        for (const auto& o : s.occluders) out.emplace_back(o.mesh);
        return out;
    }();
    for (std::size_t k : {0u, 60u, 120u, 149u})
    {
        const double t = s.frame_time(k);
        std::vector<SceneObject> objects{{&casters[0], sim.object_pose(t)}};
        for (std::size_t j = 0; j < s.occluders.size(); ++j)
            objects.push_back({&casters[j + 1], pose_at(s.occluders[j].trajectory, t)});
        const DepthImage ref = render_depth(objects, s.camera, t);
        EXPECT_TRUE(same_image(data.frames[k].depth, ref)) << k;
        EXPECT_EQ(data.frames[k].timestamp, t);
    }
}

TEST(Simulator, InvalidPixelsOnlyWithoutGeometry)
{
    Scene s = short_scene(presets::free_motion(2), 0.5);
    s.occluders.clear();
    const Simulator sim(s);
    const Dataset data = sim.generate();
    for (std::size_t k = 0; k < data.frames.size(); ++k)
    {
        const FrameTruth truth = sim.truth(s.frame_time(k));
        const DepthImage& z = data.frames[k].depth;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < z.size(); ++i)
        {
            const bool hit = std::isfinite(truth.scene_depth[i]);
            hits += hit;
            EXPECT_EQ(hit, is_valid_depth(z[i], s.camera.max_range)) << i;
        }
        EXPECT_GT(hits, 200u);
    }
}

TEST(Simulator, MinimumOverSurfaces)
{
    const Scene s = short_scene(presets::with_sweeping_occluder(presets::free_motion(3)), 5.0);
    const Simulator sim(s);
    const FrameTruth t = sim.truth(4.5);
    std::size_t occluded = 0, object = 0;
    for (std::size_t i = 0; i < t.scene_depth.size(); ++i)
    {
        EXPECT_LE(t.scene_depth[i], t.object_depth[i]);
        if (std::isfinite(t.object_depth[i])) ++object;
        if (t.occluded(i)) ++occluded;
    }
    const double fraction = static_cast<double>(occluded) / object;
    // The object keeps moving underneath the plate.
    EXPECT_GT(fraction, 0.3);
    EXPECT_LT(fraction, 0.7);
    for (double clear : {2.0, 6.5})
    {
        const FrameTruth u = sim.truth(clear);
        for (std::size_t i = 0; i < u.scene_depth.size(); ++i) EXPECT_FALSE(u.occluded(i));
    }
}

TEST(Simulator, DeterministicPerSeed)
{
    const Scene s = short_scene(presets::controlled_motion(7), 1.0);
    const Dataset a = simulate(s), b = simulate(s);
    ASSERT_EQ(a.frames.size(), 30u);
    for (std::size_t k = 0; k < a.frames.size(); ++k)
    {
        EXPECT_TRUE(same_image(a.frames[k].depth, b.frames[k].depth));
        EXPECT_EQ(a.frames[k].control->linear, b.frames[k].control->linear);
    }
    const Dataset c = simulate(short_scene(presets::controlled_motion(8), 1.0));
    EXPECT_FALSE(same_image(a.frames[3].depth, c.frames[3].depth));
}

TEST(Simulator, ControlsReproduceNominalMotion)
{
    const Scene s = short_scene(presets::controlled_motion(1), 2.0);
    const Simulator sim(s);
    const Eigen::Vector3d c = s.tracked.mesh.centroid();
    const Twist ref = presets::robot_twist();
    EXPECT_EQ(sim.control(0).linear, Eigen::Vector3d::Zero());
    for (std::size_t k = 1; k < s.frame_count(); ++k)
    {
        const Twist u = sim.control(k);
        EXPECT_LT((u.linear - ref.linear).norm(), 1e-9);
        EXPECT_LT((u.angular - ref.angular).norm(), 1e-9);
        const Pose next = compose(sim.nominal_pose(s.frame_time(k - 1)), exp_twist(u, 1.0 / s.frame_rate, c));
        EXPECT_LT(translation_distance(next, sim.nominal_pose(s.frame_time(k))), 1e-9);
    }
    const Dataset data = sim.generate();
    EXPECT_TRUE(data.has_controls);
    EXPECT_TRUE(data.frames[5].control.has_value());

    const Dataset free = simulate(short_scene(presets::free_motion(1), 0.5));
    EXPECT_FALSE(free.has_controls);
    EXPECT_FALSE(free.frames[5].control.has_value());
}

TEST(Simulator, OccluderCoversHalfTheStartingSilhouette)
{
    Scene s = presets::free_motion(3);
    s.tracked.trajectory = {StaticMotion{pose_at(s.tracked.trajectory, 0.0)}, s.duration};
    const Simulator sim(presets::with_sweeping_occluder(s));
    for (double t : {3.5, 4.5, 5.5})
    {
        const FrameTruth truth = sim.truth(t);
        std::size_t occluded = 0, object = 0;
        for (std::size_t i = 0; i < truth.scene_depth.size(); ++i)
        {
            object += std::isfinite(truth.object_depth[i]);
            occluded += truth.occluded(i);
        }
        EXPECT_NEAR(static_cast<double>(occluded) / object, 0.5, 0.02) << t;
    }
    for (double t : {3.0, 6.0})
    {
        const FrameTruth truth = sim.truth(t);
        for (std::size_t i = 0; i < truth.scene_depth.size(); ++i) EXPECT_FALSE(truth.occluded(i)) << t;
    }
}

TEST(Simulator, SlipIsInvisibleToControls)
{
    const Scene s = presets::disturbed_motion(1);
    const Simulator sim(s);
    const double before = presets::kSlipStart - 0.1;
    const double after = presets::kSlipStart + presets::kSlipFrames / s.frame_rate + 0.1;
    EXPECT_LT(translation_distance(sim.object_pose(before), sim.nominal_pose(before)), 1e-15);
    const Pose slipped = sim.object_pose(after);
    const Pose nominal = sim.nominal_pose(after);
    const Eigen::Vector3d c = s.tracked.mesh.centroid();
    EXPECT_NEAR((slipped * c - nominal * c).norm(), 0.03, 1e-9);
    EXPECT_NEAR(geodesic_angle(slipped, nominal), 0.2, 1e-9);
    // The recorded twist is the same throughout the slip.
    const std::size_t k = static_cast<std::size_t>(std::lround((presets::kSlipStart + 0.1) * s.frame_rate));
    EXPECT_LT((sim.control(k).linear - presets::robot_twist().linear).norm(), 1e-9);
}

TEST(Simulator, FreeMotionSpeedLimits)
{
    const Scene s = presets::free_motion(1);
    const Simulator sim(s);
    const Eigen::Vector3d c = s.tracked.mesh.centroid();
    const double h = 1e-3;
    double vmax = 0.0, wmax = 0.0;
    for (double t = 0.0; t + h <= s.duration; t += 0.01)
    {
        const Pose a = sim.object_pose(t), b = sim.object_pose(t + h);
        vmax = std::max(vmax, (b * c - a * c).norm() / h);
        wmax = std::max(wmax, geodesic_angle(a, b) / h);
    }
    EXPECT_LE(vmax, 0.05);
    EXPECT_LE(wmax, 30.0 * std::numbers::pi / 180.0);
    EXPECT_GT(vmax, 0.02);
}

TEST(Simulator, ResidualsFollowSensorNoise)
{
    Scene s = short_scene(presets::free_motion(5), 0.2);
    s.obs_params.beta = 0.0;
    const Simulator sim(s);
    std::vector<double> edges{-1e300};
    for (int k = -10; k <= 10; ++k) edges.push_back(0.3 * k);
    edges.push_back(1e300);
    std::vector<long> counts(edges.size() - 1, 0);
    long n = 0;
    for (std::size_t k = 0; k < s.frame_count(); ++k)
    {
        const FrameTruth t = sim.truth(s.frame_time(k));
        const DepthImage z = sim.measure(k, t);
        for (std::size_t i = 0; i < z.size(); ++i)
        {
            if (!std::isfinite(t.scene_depth[i])) continue;
            const double r = (z[i] - t.scene_depth[i]) / sigma_c(t.scene_depth[i], s.obs_params);
            // The float image quantizes depth well below the noise level.
            const auto it = std::upper_bound(edges.begin(), edges.end(), r);
            ++counts[std::distance(edges.begin(), it) - 1];
            ++n;
        }
    }
    double chi2 = 0.0;
    for (std::size_t b = 0; b < counts.size(); ++b)
    {
        const double p = normal_cdf(std::max(-40.0, std::min(40.0, edges[b + 1]))) -
                         normal_cdf(std::max(-40.0, std::min(40.0, edges[b])));
        const double e = p * n;
        chi2 += (counts[b] - e) * (counts[b] - e) / e;
    }
    const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}

TEST(Simulator, ValidatesScene)
{
    Scene s = presets::free_motion(1);
    s.duration = 20.0;
    EXPECT_THROW(Simulator{s}, std::invalid_argument);
    s = presets::free_motion(1);
    s.frame_rate = 0.0;
    EXPECT_THROW(Simulator{s}, std::invalid_argument);
    EXPECT_THROW(presets::by_name("zzz", 1), std::invalid_argument);
    EXPECT_NO_THROW(presets::by_name("a-occluded", 1));
}
