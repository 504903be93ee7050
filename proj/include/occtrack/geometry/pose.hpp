#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace occtrack
{
/**
 * \brief Rigid transform from the object frame into the camera frame.
 *
 * The rotation is kept as a unit quaternion; every operation below
 * renormalizes its result.
 */
struct Pose
{
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

    static Pose identity() { return {}; }

    Eigen::Vector3d operator*(const Eigen::Vector3d& point) const
    {
        return rotation * point + translation;
    }
};

/// Linear velocity (m/s) of a reference point and angular velocity (rad/s)
/// about it, both expressed in the object frame.
struct Twist
{
    Eigen::Vector3d linear = Eigen::Vector3d::Zero();
    Eigen::Vector3d angular = Eigen::Vector3d::Zero();

    bool is_finite() const
    {
        return linear.allFinite() && angular.allFinite();
    }

    Twist operator+(const Twist& other) const
    {
        return {linear + other.linear, angular + other.angular};
    }
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

/// Rotation vector (axis * angle) to unit quaternion.
inline Eigen::Quaterniond exp_so3(const Eigen::Vector3d& rotation_vector)
{
    const double angle = rotation_vector.norm();
    double w, scale;
    if (angle < 1e-6)
    {
        const double a2 = angle * angle;
        w = 1.0 - a2 / 8.0;
        scale = 0.5 - a2 / 48.0;
    }
    else
    {
        w = std::cos(0.5 * angle);
        scale = std::sin(0.5 * angle) / angle;
    }
    Eigen::Quaterniond q(w,
                         scale * rotation_vector.x(),
                         scale * rotation_vector.y(),
                         scale * rotation_vector.z());
    q.normalize();
    return q;
}

/// Unit quaternion to rotation vector with angle in [0, pi].
inline Eigen::Vector3d log_so3(const Eigen::Quaterniond& rotation)
{
    Eigen::Quaterniond q = rotation.normalized();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Eigen::Vector3d v = q.vec();
    const double s = v.norm();
    if (s < 1e-9)
    {
        return (2.0 / q.w()) * v;
    }
    const double angle = 2.0 * std::atan2(s, q.w());
    return (angle / s) * v;
}

/// Left Jacobian of SO(3); maps a twist's linear part to the translation of
/// its exponential.
inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi)
{
    const double angle = phi.norm();
    const Eigen::Matrix3d k = skew(phi);
    if (angle < 1e-5)
    {
        return Eigen::Matrix3d::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
    }
    const double a2 = angle * angle;
    return Eigen::Matrix3d::Identity() + ((1.0 - std::cos(angle)) / a2) * k +
           ((angle - std::sin(angle)) / (a2 * angle)) * k * k;
}

inline Pose normalized(Pose p)
{
    p.rotation.normalize();
    return p;
}

inline Pose compose(const Pose& a, const Pose& b)
{
    Pose out;
    out.translation = a.rotation * b.translation + a.translation;
    out.rotation = a.rotation * b.rotation;
    out.rotation.normalize();
    return out;
}

inline Pose inverse(const Pose& p)
{
    Pose out;
    out.rotation = p.rotation.conjugate();
    out.rotation.normalize();
    out.translation = -(out.rotation * p.translation);
    return out;
}

/**
 * \brief Rigid displacement obtained by holding a twist constant for dt.
 *
 * The motion is the SE(3) exponential conjugated by a translation to
 * \p center: the object rotates about \p center while \p center itself
 * moves with the twist's linear velocity. Holding the twist fixed gives a
 * one-parameter subgroup, so exp_twist(xi, a + b) = exp_twist(xi, a) *
 * exp_twist(xi, b).
 */
inline Pose exp_twist(const Twist& xi, double dt, const Eigen::Vector3d& center)
{
    if (!(dt >= 0.0)) throw std::invalid_argument("exp_twist: dt must be >= 0");
    const Eigen::Vector3d phi = xi.angular * dt;
    Pose out;
    out.rotation = exp_so3(phi);
    out.translation = center - out.rotation * center +
                      so3_left_jacobian(phi) * (xi.linear * dt);
    return out;
}

/// Inverse of exp_twist: the constant twist that produces \p displacement
/// over \p dt.
inline Twist log_twist(const Pose& displacement, double dt, const Eigen::Vector3d& center)
{
    if (!(dt > 0.0)) throw std::invalid_argument("log_twist: dt must be > 0");
    const Eigen::Vector3d phi = log_so3(displacement.rotation);
    const Eigen::Vector3d rhs =
        displacement.translation - center + displacement.rotation * center;
    Twist out;
    out.angular = phi / dt;
    out.linear = so3_left_jacobian(phi).partialPivLu().solve(rhs) / dt;
    return out;
}

/// Angle of the relative rotation between two poses, in [0, pi].
inline double geodesic_angle(const Pose& a, const Pose& b)
{
    const Eigen::Quaterniond rel = a.rotation.conjugate() * b.rotation;
    return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

inline double translation_distance(const Pose& a, const Pose& b)
{
    return (a.translation - b.translation).norm();
}

}  // namespace occtrack
