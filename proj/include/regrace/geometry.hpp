#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace regrace {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Rigid body transform in SE(3). The rotation is stored as a matrix and is
/// the single canonical representation throughout the library; construction
/// rejects anything farther than 1e-9 from SO(3).
class Pose {
public:
    Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

    /// Throws std::invalid_argument if `rotation` is not orthonormal with
    /// determinant +1 within 1e-9, or if any entry is non-finite.
    Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

    static Pose identity() { return Pose(); }

    const Eigen::Matrix3d& rotation() const { return rotation_; }
    const Eigen::Vector3d& translation() const { return translation_; }

    Pose inverse() const;

    /// Composition: (a * b) maps b-input coordinates through b, then a.
    Pose operator*(const Pose& other) const;

    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
        return rotation_ * p + translation_;
    }

private:
    Eigen::Matrix3d rotation_;
    Eigen::Vector3d translation_;
};

/// N x 3 point set with an optional per-point payload index.
struct PointSet {
    PointMatrix points;
    std::vector<std::int64_t> payload;

    Eigen::Index size() const { return points.rows(); }
};

/// Transforms every point by R*p + t. Throws std::invalid_argument on
/// non-finite input coordinates.
PointSet apply(const Pose& pose, const PointSet& pts);
PointMatrix apply(const Pose& pose, const PointMatrix& pts);

/// a^-1 * b: maps frame-b coordinates into frame a.
Pose relative(const Pose& a, const Pose& b);

/// Angle of R_gt^-1 * R_est in degrees; trace clamped before acos so results
/// near 0 and 180 degrees stay in [0, 180].
double rotation_error_deg(const Pose& est, const Pose& gt);

/// Euclidean norm of the relative translation expressed in the gt frame.
double translation_error_m(const Pose& est, const Pose& gt);

/// Rotation matrix for a given axis (normalized internally) and angle.
Eigen::Matrix3d rotation_about(const Eigen::Vector3d& axis, double angle_rad);

/// Nearest rotation matrix in the Frobenius sense (SVD projection).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

}  // namespace regrace
