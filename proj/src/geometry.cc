#include "rcpose/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rcpose {

namespace {

constexpr double kDegenerateNorm = 1e-12;
constexpr double kUnitTolerance = 8.0 * std::numeric_limits<double>::epsilon();

bool finite(double v) { return std::isfinite(v); }

}  // namespace

Rotation::Rotation(const Eigen::Quaterniond &q) : q_(q) {
    // Already-unit input is kept bit-exact so serialized rotations read back unchanged.
    if (std::abs(q_.squaredNorm() - 1.0) > kUnitTolerance) {
        q_.normalize();
    }
    if (q_.w() < 0.0) {
        q_.coeffs() = -q_.coeffs();
    }
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
    if (!finite(w) || !finite(x) || !finite(y) || !finite(z)) {
        throw DomainError("rotation: non-finite quaternion");
    }
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n < kDegenerateNorm) {
        throw DomainError("rotation: zero quaternion");
    }
    return Rotation(Eigen::Quaterniond(w, x, y, z));
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond &q) { return from_quaternion(q.w(), q.x(), q.y(), q.z()); }

Rotation Rotation::from_matrix(const Mat3 &m) {
    if (!m.allFinite()) {
        throw DomainError("rotation: non-finite matrix");
    }
    return Rotation(Eigen::Quaterniond(m));
}

Rotation Rotation::from_axis_angle(const Vec3 &axis, double angle) {
    const double n = axis.norm();
    if (n < kDegenerateNorm || !finite(angle)) {
        return Rotation();
    }
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis / n)));
}

Rotation Rotation::from_euler_xyz(double a, double b, double c) {
    const Eigen::Quaterniond q = Eigen::AngleAxisd(c, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
                                 Eigen::AngleAxisd(a, Vec3::UnitX());
    return Rotation(q);
}

double Rotation::angle() const { return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w())); }

void CameraIntrinsics::validate() const {
    if (!(focal > 0.0) || !finite(focal) || !finite(cx) || !finite(cy)) {
        throw DomainError("intrinsics: focal length must be positive and finite");
    }
}

void ParamState::validate() const {
    if (!(focal > 0.0) || !finite(focal)) {
        throw DomainError("state: focal length must be positive and finite");
    }
    if (!translation.allFinite()) {
        throw DomainError("state: non-finite translation");
    }
    if (!(translation.z() > 0.0)) {
        throw DomainError("state: depth z must be positive");
    }
}

BBox BBox::make(double x1, double y1, double x2, double y2) {
    BBox b{x1, y1, x2, y2};
    b.validate();
    return b;
}

double BBox::diagonal() const { return std::hypot(width(), height()); }

void BBox::validate() const {
    if (!finite(x1) || !finite(y1) || !finite(x2) || !finite(y2) || !(x1 < x2) || !(y1 < y2)) {
        std::ostringstream os;
        os << "bbox: invalid box [" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << "]";
        throw DomainError(os.str());
    }
}

Vec2 project_point(const CameraIntrinsics &intrinsics, const Rotation &rotation, const Translation3 &translation,
                   const Vec3 &p) {
    const Vec3 pc = rotation.rotate(p) + translation;
    if (!(pc.z() > 0.0)) {
        std::ostringstream os;
        os << "project_point: non-positive depth " << pc.z() << " for point (" << p.x() << ", " << p.y() << ", "
           << p.z() << ")";
        throw DomainError(os.str());
    }
    return Vec2(intrinsics.focal * pc.x() / pc.z() + intrinsics.cx, intrinsics.focal * pc.y() / pc.z() + intrinsics.cy);
}

Mat3 rotation_matrix_from_6d(const Vec3 &v1, const Vec3 &v2) {
    if (!v1.allFinite() || !v2.allFinite()) {
        throw DomainError("rotation_from_6d: non-finite input");
    }
    const double n1 = v1.norm();
    if (n1 < kDegenerateNorm) {
        throw DomainError("rotation_from_6d: first vector is zero");
    }
    const Vec3 e1 = v1 / n1;
    const Vec3 u2 = v2 - e1.dot(v2) * e1;
    const double n2 = u2.norm();
    if (n2 < kDegenerateNorm) {
        throw DomainError("rotation_from_6d: vectors are parallel");
    }
    const Vec3 e2 = u2 / n2;
    Mat3 r;
    r.col(0) = e1;
    r.col(1) = e2;
    r.col(2) = e1.cross(e2);
    return r;
}

Rotation rotation_from_6d(const Vec3 &v1, const Vec3 &v2) { return Rotation::from_matrix(rotation_matrix_from_6d(v1, v2)); }

double geodesic_distance(const Rotation &a, const Rotation &b) {
    const Eigen::Quaterniond d = a.quaternion() * b.quaternion().conjugate();
    // atan2 form stays well conditioned near both 0 and pi.
    return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

double bbox_iou(const BBox &a, const BBox &b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

CropSize compute_crop(const BBox &bbox, const Vec2 &projected_center, double aspect, double lambda) {
    if (!(lambda > 0.0) || !(aspect > 0.0)) {
        throw DomainError("compute_crop: aspect ratio and enlargement must be positive");
    }
    const double xc = projected_center.x();
    const double yc = projected_center.y();
    const double x_dist = std::max(std::abs(bbox.x1 - xc), std::abs(bbox.x2 - xc));
    const double y_dist = std::max(std::abs(bbox.y1 - yc), std::abs(bbox.y2 - yc));
    return CropSize{std::max(x_dist, y_dist / aspect) * 2.0 * lambda, std::max(x_dist / aspect, y_dist) * 2.0 * lambda};
}

CameraIntrinsics adjust_intrinsics_for_crop(const CameraIntrinsics &intrinsics, const Vec2 &crop_origin,
                                            double scale) {
    if (!(scale > 0.0)) {
        throw DomainError("adjust_intrinsics_for_crop: scale must be positive");
    }
    CameraIntrinsics out;
    out.focal = intrinsics.focal * scale;
    out.cx = (intrinsics.cx - crop_origin.x()) * scale;
    out.cy = (intrinsics.cy - crop_origin.y()) * scale;
    return out;
}

}  // namespace rcpose
