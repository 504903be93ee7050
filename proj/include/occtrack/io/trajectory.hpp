#pragma once

#include "occtrack/geometry/pose.hpp"
#include "occtrack/io/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace occtrack
{
struct TrajectorySample
{
    double timestamp = 0.0;
    Pose pose;
};

using TrajectoryRecord = std::vector<TrajectorySample>;

inline constexpr const char* kTrajectoryHeader = "timestamp,tx,ty,tz,qw,qx,qy,qz";

/// Timestamps increasing, quaternions unit within 1e-6.
inline void validate_trajectory(const TrajectoryRecord& rows)
{
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        if (k > 0 && !(rows[k].timestamp > rows[k - 1].timestamp))
            throw DatasetError("trajectory row " + std::to_string(k + 1) + ": timestamps must increase");
        if (std::abs(rows[k].pose.rotation.norm() - 1.0) > 1e-6)
            throw DatasetError("trajectory row " + std::to_string(k + 1) + ": quaternion is not unit length");
        if (!rows[k].pose.translation.allFinite())
            throw DatasetError("trajectory row " + std::to_string(k + 1) + ": non-finite translation");
    }
}

inline void write_trajectory(std::ostream& out, const TrajectoryRecord& rows)
{
    validate_trajectory(rows);
    out << kTrajectoryHeader << '\n';
    char line[512];
    for (const auto& r : rows)
    {
        const Pose& p = r.pose;
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.timestamp,
                      p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w(), p.rotation.x(),
                      p.rotation.y(), p.rotation.z());
        out << line;
    }
    if (!out) throw IoError("trajectory: write failed");
}

inline TrajectoryRecord read_trajectory(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw DatasetError("trajectory: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryHeader) throw DatasetError("trajectory: unexpected header '" + line + "'");

    TrajectoryRecord rows;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell;
        double v[8];
        int n = 0;
        while (std::getline(fields, cell, ','))
        {
            if (n == 8) throw DatasetError("trajectory line " + std::to_string(line_no) + ": too many fields");
            std::size_t used = 0;
            try
            {
                v[n] = std::stod(cell, &used);
            }
            catch (const std::exception&)
            {
                used = 0;
            }
            if (used == 0 || used != cell.size())
                throw DatasetError("trajectory line " + std::to_string(line_no) + ": bad number '" + cell + "'");
            ++n;
        }
        if (n != 8) throw DatasetError("trajectory line " + std::to_string(line_no) + ": expected 8 fields");
        TrajectorySample s;
        s.timestamp = v[0];
        s.pose.translation = Eigen::Vector3d(v[1], v[2], v[3]);
        s.pose.rotation = Eigen::Quaterniond(v[4], v[5], v[6], v[7]);
        rows.push_back(s);
    }
    validate_trajectory(rows);
    return rows;
}

inline void save_trajectory(const std::string& path, const TrajectoryRecord& rows)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trajectory '" + path + "'");
    write_trajectory(out, rows);
}

inline TrajectoryRecord load_trajectory(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory '" + path + "'");
    return read_trajectory(in);
}

/// Ground-truth rows of a dataset.
inline TrajectoryRecord ground_truth_of(const Dataset& data)
{
    if (!data.has_ground_truth) throw DatasetError("dataset has no ground-truth channel");
    TrajectoryRecord rows;
    rows.reserve(data.frames.size());
    for (const auto& f : data.frames) rows.push_back({f.timestamp, normalized(*f.ground_truth)});
    return rows;
}

}  // namespace occtrack
