#include <cmath>
#include <limits>

#include "kernels_impl.h"

namespace rcpose::kernels {

namespace detail {

namespace {

struct Transformed {
    double x, y, z;
};

inline Transformed apply(const RigidPose &pose, double px, double py, double pz) {
    const auto &r = pose.r;
    return {r[0] * px + r[1] * py + r[2] * pz + pose.t[0], r[3] * px + r[4] * py + r[5] * pz + pose.t[1],
            r[6] * px + r[7] * py + r[8] * pz + pose.t[2]};
}

}  // namespace

RigidL1 rigid_l1_scalar(const PointsView &pts, const RigidPose &a, const RigidPose &b, std::size_t begin) {
    RigidL1 out;
    for (std::size_t i = begin; i < pts.n; ++i) {
        const double p[3] = {pts.x[i], pts.y[i], pts.z[i]};
        const Transformed pa = apply(a, p[0], p[1], p[2]);
        const Transformed pb = apply(b, p[0], p[1], p[2]);
        const double d[3] = {pa.x - pb.x, pa.y - pb.y, pa.z - pb.z};
        for (int row = 0; row < 3; ++row) {
            out.value += std::abs(d[row]);
            const double s = sign(d[row]);
            out.d_t[row] += s;
            for (int col = 0; col < 3; ++col) {
                out.d_r[3 * row + col] += s * p[col];
            }
        }
    }
    return out;
}

double rigid_l2_scalar(const PointsView &pts, const RigidPose &a, const RigidPose &b, std::size_t begin) {
    double sum = 0.0;
    for (std::size_t i = begin; i < pts.n; ++i) {
        const Transformed pa = apply(a, pts.x[i], pts.y[i], pts.z[i]);
        const Transformed pb = apply(b, pts.x[i], pts.y[i], pts.z[i]);
        const double dx = pa.x - pb.x;
        const double dy = pa.y - pb.y;
        const double dz = pa.z - pb.z;
        sum += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return sum;
}

ProjectionL1 projection_l1_scalar(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb,
                                  std::size_t begin) {
    ProjectionL1 out;
    out.min_depth = std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < pts.n; ++i) {
        const double p[3] = {pts.x[i], pts.y[i], pts.z[i]};
        const Transformed pa = apply(a, p[0], p[1], p[2]);
        const Transformed pb = apply(b, p[0], p[1], p[2]);
        out.min_depth = std::fmin(out.min_depth, std::fmin(pa.z, pb.z));
        const double inv_za = 1.0 / pa.z;
        const double inv_zb = 1.0 / pb.z;
        const double ua = pa.x * inv_za;
        const double va = pa.y * inv_za;
        const double du = fa * ua - fb * (pb.x * inv_zb);
        const double dv = fa * va - fb * (pb.y * inv_zb);
        out.value += std::abs(du) + std::abs(dv);
        const double su = sign(du);
        const double sv = sign(dv);
        const double gx = su * fa * inv_za;
        const double gy = sv * fa * inv_za;
        const double gz = -(gx * ua + gy * va);
        const double g[3] = {gx, gy, gz};
        for (int row = 0; row < 3; ++row) {
            out.d_t[row] += g[row];
            for (int col = 0; col < 3; ++col) {
                out.d_r[3 * row + col] += g[row] * p[col];
            }
        }
        out.d_f += su * ua + sv * va;
    }
    return out;
}

ProjectionL2 projection_l2_scalar(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb,
                                  std::size_t begin) {
    ProjectionL2 out;
    out.min_depth = std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < pts.n; ++i) {
        const Transformed pa = apply(a, pts.x[i], pts.y[i], pts.z[i]);
        const Transformed pb = apply(b, pts.x[i], pts.y[i], pts.z[i]);
        out.min_depth = std::fmin(out.min_depth, std::fmin(pa.z, pb.z));
        const double du = fa * (pa.x / pa.z) - fb * (pb.x / pb.z);
        const double dv = fa * (pa.y / pa.z) - fb * (pb.y / pb.z);
        out.value += std::sqrt(du * du + dv * dv);
    }
    return out;
}

}  // namespace detail

namespace {

RigidL1 rigid_l1(const PointsView &pts, const RigidPose &a, const RigidPose &b) {
    return detail::rigid_l1_scalar(pts, a, b, 0);
}
double rigid_l2(const PointsView &pts, const RigidPose &a, const RigidPose &b) {
    return detail::rigid_l2_scalar(pts, a, b, 0);
}
ProjectionL1 projection_l1(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb) {
    return detail::projection_l1_scalar(pts, a, fa, b, fb, 0);
}
ProjectionL2 projection_l2(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb) {
    return detail::projection_l2_scalar(pts, a, fa, b, fb, 0);
}

constexpr KernelTable kScalar{"scalar", &rigid_l1, &rigid_l2, &projection_l1, &projection_l2};

}  // namespace

const KernelTable &scalar_table() { return kScalar; }

}  // namespace rcpose::kernels
