#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace occtrack
{
/// Pinhole intrinsics. Pixel (u, v) looks along ((u - cx) / fx, (v - cy) / fy, 1).
struct CameraIntrinsics
{
    int width = 128;
    int height = 96;
    double fx = 105.0;
    double fy = 105.0;
    double cx = 63.5;
    double cy = 47.5;
    double max_range = 6.0;

    std::size_t pixel_count() const
    {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    /// Viewing ray for a pixel, scaled so that its z component is 1. A ray
    /// parameter along this direction is therefore the optical-axis depth.
    Eigen::Vector3d ray_direction(std::size_t pixel) const
    {
        const auto u = static_cast<double>(pixel % static_cast<std::size_t>(width));
        const auto v = static_cast<double>(pixel / static_cast<std::size_t>(width));
        return {(u - cx) / fx, (v - cy) / fy, 1.0};
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    Eigen::Vector2d project(const Eigen::Vector3d& p) const
    {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }

    void validate() const
    {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("camera: width and height must be positive");
        if (!(fx > 0.0) || !(fy > 0.0))
            throw std::invalid_argument("camera: focal lengths must be positive");
        if (!std::isfinite(cx) || !std::isfinite(cy))
            throw std::invalid_argument("camera: principal point must be finite");
        if (!(max_range > 0.0) || !std::isfinite(max_range))
            throw std::invalid_argument("camera: max_range must be positive");
    }

    /// The 128x96 image of a 640x480 structured-light sensor downsampled by 5.
    static CameraIntrinsics downsampled_xtion()
    {
        return {};
    }

    /// Same field of view with the pixel count scaled by \p area_factor.
    CameraIntrinsics rescaled(double area_factor) const
    {
        const double s = std::sqrt(area_factor);
        CameraIntrinsics out = *this;
        out.width = static_cast<int>(std::lround(width * s));
        out.height = static_cast<int>(std::lround(height * s));
        out.fx = fx * out.width / width;
        out.fy = fy * out.height / height;
        out.cx = (out.width - 1) * 0.5;
        out.cy = (out.height - 1) * 0.5;
        return out;
    }
};

inline bool operator==(const CameraIntrinsics& a, const CameraIntrinsics& b)
{
    return a.width == b.width && a.height == b.height && a.fx == b.fx && a.fy == b.fy &&
           a.cx == b.cx && a.cy == b.cy && a.max_range == b.max_range;
}

/// Row-major depth image in meters; invalid pixels hold quiet NaN.
struct DepthImage
{
    int width = 0;
    int height = 0;
    double timestamp = 0.0;
    std::vector<float> depths;

    DepthImage() = default;
    DepthImage(int w, int h, double t = 0.0)
        : width(w),
          height(h),
          timestamp(t),
          depths(static_cast<std::size_t>(w) * static_cast<std::size_t>(h),
                 std::numeric_limits<float>::quiet_NaN())
    {
    }

    std::size_t size() const { return depths.size(); }

    float operator[](std::size_t i) const { return depths[i]; }
    float& operator[](std::size_t i) { return depths[i]; }
};

/// A measurement that the observation model can use: finite and in (0, max_range].
inline bool is_valid_depth(double z, double max_range)
{
    return std::isfinite(z) && z > 0.0 && z <= max_range;
}

inline std::size_t count_valid(const DepthImage& image, double max_range)
{
    std::size_t n = 0;
    for (float z : image.depths)
        if (is_valid_depth(z, max_range)) ++n;
    return n;
}

}  // namespace occtrack
