#include "occtrack/harness/metrics.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace occtrack;

namespace
{
TrajectoryRecord line(std::size_t n)
{
    TrajectoryRecord rows;
    for (std::size_t k = 0; k < n; ++k)
    {
        TrajectorySample s;
        s.timestamp = k / 30.0;
        s.pose.translation = {0.01 * k, 0.0, 0.8};
        s.pose.rotation = exp_so3(Eigen::Vector3d(0.0, 0.02 * k, 0.0));
        rows.push_back(s);
    }
    return rows;
}
}  // namespace

TEST(Metrics, IdenticalTrajectoriesHaveZeroError)
{
    const TrajectoryRecord t = line(20);
    const MetricsReport r = evaluate_trajectory(t, t);
    EXPECT_EQ(r.summary.frames, 20u);
    EXPECT_EQ(r.summary.max_translation, 0.0);
    EXPECT_LT(r.summary.max_rotation, 1e-7);
    EXPECT_EQ(r.summary.loss_fraction, 0.0);
}

TEST(Metrics, ConstantOffset)
{
    const TrajectoryRecord t = line(20);
    TrajectoryRecord e = t;
    for (auto& s : e) s.pose.translation.y() += 0.01;
    const MetricsReport r = evaluate_trajectory(e, t);
    EXPECT_NEAR(r.summary.median_translation, 0.01, 1e-15);
    EXPECT_NEAR(r.summary.max_translation, 0.01, 1e-15);
    EXPECT_EQ(evaluate_trajectory(e, t, 0.005).summary.loss_fraction, 1.0);
}

TEST(Metrics, HandComputedSummary)
{
    TrajectoryRecord truth = line(3), est = truth;
    const double dt[3] = {0.01, 0.02, 0.06};
    const double dr[3] = {0.1, 0.3, 0.2};
    for (int k = 0; k < 3; ++k)
    {
        est[k].pose.translation.z() += dt[k];
        est[k].pose.rotation = truth[k].pose.rotation * exp_so3(Eigen::Vector3d(dr[k], 0.0, 0.0));
    }
    const MetricsReport r = evaluate_trajectory(est, truth);
    const ErrorSummary& s = r.summary;
    EXPECT_NEAR(s.median_translation, 0.02, 1e-12);
    EXPECT_NEAR(s.p95_translation, 0.02 + 0.9 * 0.04, 1e-12);
    EXPECT_NEAR(s.max_translation, 0.06, 1e-12);
    EXPECT_NEAR(s.median_rotation, 0.2, 1e-9);
    EXPECT_NEAR(s.max_rotation, 0.3, 1e-9);
    EXPECT_NEAR(s.loss_fraction, 1.0 / 3.0, 1e-15);
    EXPECT_TRUE(r.frames[2].lost);
    EXPECT_FALSE(r.frames[1].lost);
}

TEST(Metrics, Percentile)
{
    EXPECT_EQ(percentile({3.0, 1.0, 2.0}, 0.0), 1.0);
    EXPECT_EQ(percentile({3.0, 1.0, 2.0}, 1.0), 3.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_THROW(percentile({}, 0.5), std::invalid_argument);
    EXPECT_THROW(percentile({1.0}, 1.5), std::invalid_argument);
}

TEST(Metrics, TimestampMismatch)
{
    const TrajectoryRecord t = line(5);
    EXPECT_THROW(evaluate_trajectory(line(4), t), TimestampMismatch);
    TrajectoryRecord shifted = t;
    shifted[3].timestamp += 1e-3;
    EXPECT_THROW(evaluate_trajectory(shifted, t), TimestampMismatch);
    shifted[3].timestamp = t[3].timestamp + 1e-7;
    EXPECT_NO_THROW(evaluate_trajectory(shifted, t));
}

TEST(Metrics, CsvLayout)
{
    TrajectoryRecord truth = line(2), est = truth;
    est[1].pose.translation.x() += 0.5;
    std::ostringstream out;
    write_metrics_csv(out, evaluate_trajectory(est, truth));
    std::istringstream in(out.str());
    std::string header, a, b;
    std::getline(in, header);
    std::getline(in, a);
    std::getline(in, b);
    EXPECT_EQ(header, "timestamp,translation_error,rotation_error,lost");
    EXPECT_EQ(a, "0,0,0,0");
    EXPECT_EQ(b.substr(b.size() - 2), ",1");
    EXPECT_NE(format_summary(evaluate_trajectory(est, truth)).find("tracking loss"), std::string::npos);
}
