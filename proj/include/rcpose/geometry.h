#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>

namespace rcpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Raised when an input violates a mathematical precondition (non-positive
// depth, degenerate 6D basis, non-finite update, ...).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

// Raised by the distribution fitters when the data cannot support a fit.
class DegenerateFitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Unit quaternion rotation. The stored quaternion is kept with w >= 0 so that
// q and -q (the same rotation) have one representation.
class Rotation {
  public:
    Rotation() : q_(Eigen::Quaterniond::Identity()) {}

    // Normalizes the input; throws DomainError for zero or non-finite input.
    static Rotation from_quaternion(double w, double x, double y, double z);
    static Rotation from_quaternion(const Eigen::Quaterniond &q);
    // Projects onto SO(3) only through the quaternion conversion; the input is
    // expected to be orthonormal already.
    static Rotation from_matrix(const Mat3 &m);
    static Rotation from_axis_angle(const Vec3 &axis, double angle);
    // Extrinsic x-y-z Euler angles, i.e. Rz(c) * Ry(b) * Rx(a).
    static Rotation from_euler_xyz(double a, double b, double c);

    const Eigen::Quaterniond &quaternion() const { return q_; }
    Mat3 matrix() const { return q_.toRotationMatrix(); }
    Vec3 rotate(const Vec3 &p) const { return q_ * p; }

    Rotation inverse() const { return Rotation(q_.conjugate()); }
    Rotation operator*(const Rotation &rhs) const { return Rotation(q_ * rhs.q_); }

    // Rotation angle in [0, pi].
    double angle() const;

  private:
    explicit Rotation(const Eigen::Quaterniond &q);
    Eigen::Quaterniond q_;
};

using Translation3 = Vec3;

struct CameraIntrinsics {
    double focal = 600.0;  // f_x = f_y, pixels
    double cx = 0.0;
    double cy = 0.0;

    void validate() const;
};

// theta = {R, t, f}: the quantity iterated by the refinement loop.
struct ParamState {
    Rotation rotation;
    Translation3 translation = Translation3(0.0, 0.0, 1.0);
    double focal = 600.0;

    void validate() const;
};

struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 1.0;
    double y2 = 1.0;

    static BBox make(double x1, double y1, double x2, double y2);

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double diagonal() const;
    Vec2 center() const { return Vec2(0.5 * (x1 + x2), 0.5 * (y1 + y2)); }
    void validate() const;
};

// Pinhole projection of p under (R, t) with focal f and principal point c.
// Throws DomainError when the camera-frame depth is not positive.
Vec2 project_point(const CameraIntrinsics &intrinsics, const Rotation &rotation, const Translation3 &translation,
                   const Vec3 &p);

// Gram-Schmidt map from the 6D representation (two 3-vectors) to SO(3).
Mat3 rotation_matrix_from_6d(const Vec3 &v1, const Vec3 &v2);
Rotation rotation_from_6d(const Vec3 &v1, const Vec3 &v2);

// Geodesic angle between two rotations, in [0, pi].
double geodesic_distance(const Rotation &a, const Rotation &b);

double bbox_iou(const BBox &a, const BBox &b);

struct CropSize {
    double width;
    double height;
};

inline constexpr double kDefaultCropEnlargement = 1.4;

// Crop extent around the projected object center so that the detection box
// fits with enlargement `lambda` at image aspect ratio `aspect` (= w / h).
CropSize compute_crop(const BBox &bbox, const Vec2 &projected_center, double aspect,
                      double lambda = kDefaultCropEnlargement);

// Intrinsics after cropping at `crop_origin` and resizing by `scale`.
// Cropping only moves the principal point; resizing scales everything.
CameraIntrinsics adjust_intrinsics_for_crop(const CameraIntrinsics &intrinsics, const Vec2 &crop_origin,
                                            double scale);

}  // namespace rcpose
