#pragma once

#include "occtrack/geometry/camera.hpp"
#include "occtrack/geometry/mesh.hpp"
#include "occtrack/geometry/pose.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace occtrack
{
/// Determinant threshold of the ray-triangle test.
inline constexpr double kRayTriangleEpsilon = 1e-9;

/**
 * Moller-Trumbore ray/triangle test split into the part that depends only on
 * the ray origin and the triangle, and the part that depends on the
 * direction. Casting many rays from one origin reuses the first part.
 */
struct RayTriangleSetup
{
    Eigen::Vector3d e1, e2, s, q;
    double t_numerator;

    RayTriangleSetup(const Eigen::Vector3d& origin, const Eigen::Vector3d& v0, const Eigen::Vector3d& v1,
                     const Eigen::Vector3d& v2)
        : e1(v1 - v0), e2(v2 - v0), s(origin - v0), q(s.cross(e1)), t_numerator(e2.dot(q))
    {
    }

    /// Ray parameter of the hit; nothing for parallel rays, misses, and t <= 0.
    /// The barycentric bounds are checked before dividing by the determinant.
    std::optional<double> operator()(const Eigen::Vector3d& dir) const
    {
        const Eigen::Vector3d p = dir.cross(e2);
        const double det = e1.dot(p);
        const double u = s.dot(p);
        const double v = dir.dot(q);
        if (det > kRayTriangleEpsilon)
        {
            if (u < 0.0 || u > det || v < 0.0 || u + v > det || !(t_numerator > 0.0)) return std::nullopt;
        }
        else if (det < -kRayTriangleEpsilon)
        {
            if (u > 0.0 || u < det || v > 0.0 || u + v < det || !(t_numerator < 0.0)) return std::nullopt;
        }
        else
        {
            return std::nullopt;
        }
        return t_numerator / det;
    }
};

/// Moller-Trumbore ray/triangle intersection for a single ray.
inline std::optional<double> intersect_triangle(const Eigen::Vector3d& origin,
                                                const Eigen::Vector3d& dir,
                                                const Eigen::Vector3d& v0,
                                                const Eigen::Vector3d& v1,
                                                const Eigen::Vector3d& v2)
{
    return RayTriangleSetup(origin, v0, v1, v2)(dir);
}

/// Nearest hit over every triangle, no acceleration structure.
inline std::optional<double> intersect_brute_force(const TriangleMesh& mesh,
                                                   const Eigen::Vector3d& origin,
                                                   const Eigen::Vector3d& dir)
{
    std::optional<double> best;
    for (const auto& t : mesh.triangles)
    {
        const auto hit = intersect_triangle(origin, dir, mesh.vertices[t[0]],
                                            mesh.vertices[t[1]], mesh.vertices[t[2]]);
        if (hit && (!best || *hit < *best)) best = hit;
    }
    return best;
}

/// Half-open pixel rectangle [u0, u1) x [v0, v1).
struct PixelRect
{
    int u0 = 0, v0 = 0, u1 = 0, v1 = 0;

    bool empty() const { return u0 >= u1 || v0 >= v1; }
    std::size_t area() const
    {
        return empty() ? 0 : static_cast<std::size_t>(u1 - u0) * static_cast<std::size_t>(v1 - v0);
    }
};

/**
 * \brief Triangle mesh with a median-split bounding volume hierarchy.
 *
 * Immutable after construction and safe to share between threads. Rays are
 * intersected in the object frame so one hierarchy serves every pose.
 */
class MeshRaycaster
{
public:
    static constexpr int kLeafSize = 4;
    /// Pixels.
    static constexpr double kCoverMargin = 0.01;

    explicit MeshRaycaster(TriangleMesh mesh) : mesh_(std::move(mesh))
    {
        mesh_.validate();
        centroid_ = mesh_.centroid();
        order_.resize(mesh_.triangles.size());
        std::iota(order_.begin(), order_.end(), 0u);
        centers_.reserve(mesh_.triangles.size());
        for (const auto& t : mesh_.triangles)
        {
            centers_.push_back((mesh_.vertices[t[0]] + mesh_.vertices[t[1]] +
                                mesh_.vertices[t[2]]) / 3.0);
        }
        if (!order_.empty()) build_root();
        centers_.clear();
        centers_.shrink_to_fit();
    }

    const TriangleMesh& mesh() const { return mesh_; }
    const Eigen::Vector3d& centroid() const { return centroid_; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Bounds of the whole mesh in the object frame (empty box for no triangles).
    Eigen::AlignedBox3d bounds() const
    {
        return nodes_.empty() ? Eigen::AlignedBox3d() : nodes_.front().box;
    }

    /// Nearest hit along an object-frame ray, identical to intersect_brute_force.
    std::optional<double> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const
    {
        if (nodes_.empty()) return std::nullopt;
        const Eigen::Vector3d inv_dir = dir.cwiseInverse();
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0)
        {
            const Node& node = nodes_[stack[--top]];
            if (!hits_box(node.box, origin, inv_dir, best)) continue;
            if (node.count > 0)
            {
                for (std::uint32_t k = node.first; k < node.first + node.count; ++k)
                {
                    const auto& t = mesh_.triangles[order_[k]];
                    const auto hit = intersect_triangle(origin, dir, mesh_.vertices[t[0]],
                                                        mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
                    if (hit && *hit < best) best = *hit;
                }
            }
            else
            {
                stack[top++] = node.first;
                stack[top++] = node.first + 1;
            }
        }
        if (std::isinf(best)) return std::nullopt;
        return best;
    }

    /// Pixels whose rays can hit the mesh at \p pose (conservative).
    PixelRect projected_bounds(const Pose& pose, const CameraIntrinsics& cam) const
    {
        if (nodes_.empty()) return {};
        const PixelRect full{0, 0, cam.width, cam.height};
        const Eigen::Matrix3d r = pose.rotation.toRotationMatrix();
        return box_rect(nodes_.front().box, r, pose.translation, cam, full);
    }

    /**
     * Casts every pixel of \p rect (defaults to the projected bounds) and
     * calls fn(pixel_index, depth) for each hit, in row-major order. Depth is
     * measured along the optical axis.
     *
     * The hierarchy is traversed once per image: a node or triangle is
     * tested only against the pixels inside its projected rectangle. Each
     * tested pixel runs the same ray/triangle test as intersect(), so the
     * depths equal the per-ray results exactly.
     */
    template <typename Fn>
    void for_each_hit(const Pose& pose, const CameraIntrinsics& cam, Fn&& fn) const
    {
        for_each_hit(pose, cam, projected_bounds(pose, cam), std::forward<Fn>(fn));
    }

    template <typename Fn>
    void for_each_hit(const Pose& pose, const CameraIntrinsics& cam, PixelRect rect, Fn&& fn) const
    {
        rect = clip(rect, {0, 0, cam.width, cam.height});
        if (rect.empty() || nodes_.empty()) return;
        const Eigen::Matrix3d r = pose.rotation.toRotationMatrix();
        const Eigen::Matrix3d rt = r.transpose();
        const Eigen::Vector3d origin = -(rt * pose.translation);
        const int w = rect.u1 - rect.u0;

        // Scratch per thread; directions are filled in on first use.
        thread_local std::vector<double> depth;
        thread_local std::vector<Eigen::Vector3d> dirs;
        thread_local std::vector<char> have_dir;
        depth.assign(rect.area(), std::numeric_limits<double>::infinity());
        dirs.resize(rect.area());
        have_dir.assign(rect.area(), 0);

        struct Entry
        {
            std::uint32_t node;
            PixelRect rect;
        };
        Entry stack[64];
        int top = 0;
        stack[top++] = {0, rect};
        while (top > 0)
        {
            const Entry e = stack[--top];
            const Node& node = nodes_[e.node];
            const PixelRect nr = box_rect(node.box, r, pose.translation, cam, e.rect);
            if (nr.empty()) continue;
            if (node.count == 0)
            {
                stack[top++] = {node.first, nr};
                stack[top++] = {node.first + 1, nr};
                continue;
            }
            for (std::uint32_t k = node.first; k < node.first + node.count; ++k)
            {
                const auto& tri = mesh_.triangles[order_[k]];
                const Eigen::Vector3d& a = mesh_.vertices[tri[0]];
                const Eigen::Vector3d& b = mesh_.vertices[tri[1]];
                const Eigen::Vector3d& c = mesh_.vertices[tri[2]];
                const PixelRect tr = points_rect(std::array<Eigen::Vector3d, 3>{a, b, c}, r, pose.translation, cam, nr);
                if (tr.empty()) continue;
                const RayTriangleSetup test(origin, a, b, c);
                const CoverageTest cover(a, b, c, r, pose.translation, cam);
                for (int v = tr.v0; v < tr.v1; ++v)
                {
                    const std::size_t row = static_cast<std::size_t>((v - rect.v0) * w - rect.u0);
                    for (int u = tr.u0; u < tr.u1; ++u)
                    {
                        if (!cover(u, v)) continue;
                        const std::size_t i = row + static_cast<std::size_t>(u);
                        if (!have_dir[i])
                        {
                            const std::size_t pixel = static_cast<std::size_t>(v) * static_cast<std::size_t>(cam.width) +
                                                      static_cast<std::size_t>(u);
                            dirs[i] = rt * cam.ray_direction(pixel);
                            have_dir[i] = 1;
                        }
                        const auto hit = test(dirs[i]);
                        if (hit && *hit < depth[i]) depth[i] = *hit;
                    }
                }
            }
        }

        for (int v = rect.v0; v < rect.v1; ++v)
        {
            const std::size_t base = static_cast<std::size_t>(v) * static_cast<std::size_t>(cam.width);
            const std::size_t row = static_cast<std::size_t>((v - rect.v0) * w);
            for (int u = rect.u0; u < rect.u1; ++u)
            {
                const double d = depth[row + static_cast<std::size_t>(u - rect.u0)];
                if (d < std::numeric_limits<double>::infinity()) fn(base + static_cast<std::size_t>(u), d);
            }
        }
    }

private:
    struct Node
    {
        Eigen::AlignedBox3d box;
        std::uint32_t first = 0;  // triangle offset for leaves, left child otherwise
        std::uint32_t count = 0;  // 0 for interior nodes
    };

    static bool hits_box(const Eigen::AlignedBox3d& box, const Eigen::Vector3d& origin,
                         const Eigen::Vector3d& inv_dir, double t_max)
    {
        double t0 = 0.0;
        double t1 = t_max;
        for (int k = 0; k < 3; ++k)
        {
            double tn = (box.min()[k] - origin[k]) * inv_dir[k];
            double tf = (box.max()[k] - origin[k]) * inv_dir[k];
            if (tn > tf) std::swap(tn, tf);
            // NaN (0 * inf) leaves the interval unchanged.
            if (tn > t0) t0 = tn;
            if (tf < t1) t1 = tf;
            if (t0 > t1) return false;
        }
        return true;
    }

    /**
     * Conservative 2D coverage: the projected triangle grown by kCoverMargin
     * pixels, far more than the rounding difference between the projection
     * and the 3D test. Pixels outside cannot see the triangle; everything
     * else goes to the exact 3D test. Triangles that reach behind the image plane or project
     * to a sliver accept every pixel.
     */
    struct CoverageTest
    {
        double a[3], b[3], c[3];
        bool all = false;

        CoverageTest(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& p2,
                     const Eigen::Matrix3d& r, const Eigen::Vector3d& t, const CameraIntrinsics& cam)
        {
            Eigen::Vector2d q[3];
            const Eigen::Vector3d* src[3] = {&p0, &p1, &p2};
            for (int k = 0; k < 3; ++k)
            {
                const Eigen::Vector3d p = r * *src[k] + t;
                if (!(p.z() > 1e-6))
                {
                    all = true;
                    return;
                }
                q[k] = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
            }
            const Eigen::Vector2d e01 = q[1] - q[0], e02 = q[2] - q[0];
            const double area = e01.x() * e02.y() - e01.y() * e02.x();
            if (!(std::abs(area) > 1e-6))
            {
                all = true;
                return;
            }
            const double sign = area > 0.0 ? 1.0 : -1.0;
            for (int k = 0; k < 3; ++k)
            {
                // Signed distance to edge k, positive inside, as a*u + b*v + c.
                const Eigen::Vector2d& from = q[k];
                const Eigen::Vector2d& to = q[(k + 1) % 3];
                const Eigen::Vector2d e = to - from;
                const double len = e.norm();
                a[k] = -sign * e.y() / len;
                b[k] = sign * e.x() / len;
                c[k] = -(a[k] * from.x() + b[k] * from.y()) + kCoverMargin;
            }
        }

        bool operator()(int u, int v) const
        {
            if (all) return true;
            for (int k = 0; k < 3; ++k)
                if (a[k] * u + b[k] * v + c[k] < 0.0) return false;
            return true;
        }
    };

    static PixelRect clip(const PixelRect& a, const PixelRect& b)
    {
        return {std::max(a.u0, b.u0), std::max(a.v0, b.v0), std::min(a.u1, b.u1), std::min(a.v1, b.v1)};
    }

    /**
     * Pixels of \p limit whose centers can see any of the points' convex hull.
     * A point at or behind the image plane leaves \p limit unchanged. The
     * one-pixel margin absorbs rounding in the projection.
     */
    template <std::size_t K>
    static PixelRect points_rect(const std::array<Eigen::Vector3d, K>& points, const Eigen::Matrix3d& r,
                                 const Eigen::Vector3d& t, const CameraIntrinsics& cam, const PixelRect& limit)
    {
        double umin = std::numeric_limits<double>::infinity(), vmin = umin;
        double umax = -umin, vmax = -umin;
        for (const auto& x : points)
        {
            const Eigen::Vector3d p = r * x + t;
            if (!(p.z() > 1e-6)) return limit;
            const double u = cam.fx * p.x() / p.z() + cam.cx;
            const double v = cam.fy * p.y() / p.z() + cam.cy;
            umin = std::min(umin, u);
            umax = std::max(umax, u);
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        auto lo = [](double x, int a, int b) {
            return static_cast<int>(std::clamp(std::floor(x) - 1.0, static_cast<double>(a), static_cast<double>(b)));
        };
        auto hi = [](double x, int a, int b) {
            return static_cast<int>(std::clamp(std::ceil(x) + 2.0, static_cast<double>(a), static_cast<double>(b)));
        };
        return {lo(umin, limit.u0, limit.u1), lo(vmin, limit.v0, limit.v1), hi(umax, limit.u0, limit.u1),
                hi(vmax, limit.v0, limit.v1)};
    }

    static PixelRect box_rect(const Eigen::AlignedBox3d& box, const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                              const CameraIntrinsics& cam, const PixelRect& limit)
    {
        std::array<Eigen::Vector3d, 8> corners;
        for (int c = 0; c < 8; ++c) corners[c] = box.corner(static_cast<Eigen::AlignedBox3d::CornerType>(c));
        return points_rect(corners, r, t, cam, limit);
    }

    Eigen::AlignedBox3d triangle_box(std::uint32_t tri) const
    {
        Eigen::AlignedBox3d b;
        for (int idx : mesh_.triangles[tri]) b.extend(mesh_.vertices[idx]);
        return b;
    }

    void build_root()
    {
        nodes_.emplace_back();
        build(0, 0, static_cast<std::uint32_t>(order_.size()));
    }

    void build(std::uint32_t index, std::uint32_t begin, std::uint32_t end)
    {
        Eigen::AlignedBox3d box, centers;
        for (std::uint32_t k = begin; k < end; ++k)
        {
            box.extend(triangle_box(order_[k]));
            centers.extend(centers_[order_[k]]);
        }
        // Padding keeps the box test conservative under rounding.
        const double pad = 1e-9 * (1.0 + box.max().cwiseAbs().maxCoeff() + box.min().cwiseAbs().maxCoeff());
        box.min().array() -= pad;
        box.max().array() += pad;
        nodes_[index].box = box;

        const std::uint32_t n = end - begin;
        if (n <= kLeafSize)
        {
            nodes_[index].first = begin;
            nodes_[index].count = n;
            return;
        }
        int axis = 0;
        centers.sizes().maxCoeff(&axis);
        const std::uint32_t mid = begin + n / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return centers_[a][axis] < centers_[b][axis];
                         });
        // Children are stored adjacently so one index addresses both.
        const auto left = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        nodes_.emplace_back();
        nodes_[index].first = left;
        nodes_[index].count = 0;
        build(left, begin, mid);
        build(left + 1, mid, end);
    }

    TriangleMesh mesh_;
    Eigen::Vector3d centroid_;
    std::vector<std::uint32_t> order_;
    std::vector<Eigen::Vector3d> centers_;
    std::vector<Node> nodes_;
};

namespace detail
{
inline void object_frame_ray(const Pose& pose, const CameraIntrinsics& cam, std::size_t pixel,
                             Eigen::Vector3d& origin, Eigen::Vector3d& dir)
{
    const Eigen::Matrix3d rt = pose.rotation.toRotationMatrix().transpose();
    origin = -(rt * pose.translation);
    dir = rt * cam.ray_direction(pixel);
}
}  // namespace detail

/// Optical-axis depth of the nearest surface of the mesh along a pixel's ray.
inline std::optional<double> ray_cast(const MeshRaycaster& caster, const Pose& pose,
                                      const CameraIntrinsics& cam, std::size_t pixel)
{
    Eigen::Vector3d origin, dir;
    detail::object_frame_ray(pose, cam, pixel, origin, dir);
    return caster.intersect(origin, dir);
}

/// Reference implementation of ray_cast without the hierarchy.
inline std::optional<double> ray_cast_brute_force(const TriangleMesh& mesh, const Pose& pose,
                                                  const CameraIntrinsics& cam, std::size_t pixel)
{
    Eigen::Vector3d origin, dir;
    detail::object_frame_ray(pose, cam, pixel, origin, dir);
    return intersect_brute_force(mesh, origin, dir);
}

struct SceneObject
{
    const MeshRaycaster* caster = nullptr;
    Pose pose;
};

/// Noiseless depth image: per-pixel minimum over all objects, NaN on misses.
inline DepthImage render_depth(std::span<const SceneObject> scene, const CameraIntrinsics& cam,
                               double timestamp = 0.0)
{
    std::vector<double> depth(cam.pixel_count(), std::numeric_limits<double>::infinity());
    for (const auto& obj : scene)
    {
        obj.caster->for_each_hit(obj.pose, cam, [&](std::size_t i, double d) {
            if (d < depth[i]) depth[i] = d;
        });
    }
    DepthImage image(cam.width, cam.height, timestamp);
    for (std::size_t i = 0; i < depth.size(); ++i)
        if (std::isfinite(depth[i])) image[i] = static_cast<float>(depth[i]);
    return image;
}

}  // namespace occtrack
