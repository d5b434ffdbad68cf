#include "regrace/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace regrace {

namespace {
constexpr double kOrthonormalTol = 1e-9;
constexpr double kRadToDeg = 57.29577951308232087679815481410517;
}  // namespace

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw std::invalid_argument("Pose: non-finite entries");
    }
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    const double ortho_err = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const double det_err = std::abs(rotation.determinant() - 1.0);
    if (ortho_err > kOrthonormalTol || det_err > kOrthonormalTol) {
        throw std::invalid_argument("Pose: rotation not orthonormal with det +1");
    }
}

Pose Pose::inverse() const {
    Pose out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(rotation_.transpose() * translation_);
    return out;
}

Pose Pose::operator*(const Pose& other) const {
    Pose out;
    out.rotation_ = nearest_rotation(rotation_ * other.rotation_);
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
}

PointMatrix apply(const Pose& pose, const PointMatrix& pts) {
    if (!pts.allFinite()) {
        throw std::invalid_argument("apply: non-finite point coordinates");
    }
    PointMatrix out = pts * pose.rotation().transpose();
    out.rowwise() += pose.translation().transpose();
    return out;
}

PointSet apply(const Pose& pose, const PointSet& pts) {
    PointSet out;
    out.points = apply(pose, pts.points);
    out.payload = pts.payload;
    return out;
}

Pose relative(const Pose& a, const Pose& b) { return a.inverse() * b; }

double rotation_error_deg(const Pose& est, const Pose& gt) {
    const Eigen::Matrix3d rel = gt.rotation().transpose() * est.rotation();
    double tr = rel.trace();
    tr = std::min(3.0, std::max(-1.0, tr));
    const double c = std::min(1.0, std::max(-1.0, (tr - 1.0) / 2.0));
    return std::acos(c) * kRadToDeg;
}

double translation_error_m(const Pose& est, const Pose& gt) {
    return relative(gt, est).translation().norm();
}

Eigen::Matrix3d rotation_about(const Eigen::Vector3d& axis, double angle_rad) {
    return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

}  // namespace regrace
