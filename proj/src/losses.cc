#include "rcpose/losses.h"

#include <cmath>
#include <sstream>

namespace rcpose {

namespace {

kernels::RigidPose rigid(const Rotation &r, const Translation3 &t) {
    kernels::RigidPose pose;
    const Mat3 m = r.matrix();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) pose.r[3 * i + j] = m(i, j);
        pose.t[i] = t[i];
    }
    return pose;
}

kernels::RigidPose rigid(const ParamState &s) { return rigid(s.rotation, s.translation); }

[[noreturn]] void throw_depth_error(std::string_view what, const ModelPoints &points, const ParamState &a,
                                    const ParamState &b) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 p = points.point(i);
        const double za = (a.rotation.rotate(p) + a.translation).z();
        const double zb = (b.rotation.rotate(p) + b.translation).z();
        if (!(za > 0.0) || !(zb > 0.0)) {
            std::ostringstream os;
            os << what << ": non-positive depth at point " << i;
            throw DomainError(os.str());
        }
    }
    throw DomainError(std::string(what) + ": non-positive depth");
}

kernels::ProjectionL1 projection_l1(std::string_view what, const ModelPoints &points, const ParamState &a,
                                    const ParamState &b) {
    const auto out = kernels::active().projection_l1(points.view(), rigid(a), a.focal, rigid(b), b.focal);
    if (!(out.min_depth > 0.0)) throw_depth_error(what, points, a, b);
    return out;
}

// Vector-Jacobian product of the Gram-Schmidt map (v1, v2) -> [e1 e2 e3].
void gram_schmidt_vjp(const Vec3 &v1, const Vec3 &v2, const Mat3 &d_basis, Vec3 &g1, Vec3 &g2) {
    const double n1 = v1.norm();
    const Vec3 e1 = v1 / n1;
    const Vec3 u2 = v2 - e1.dot(v2) * e1;
    const double n2 = u2.norm();
    const Vec3 e2 = u2 / n2;

    Vec3 d_e1 = d_basis.col(0);
    Vec3 d_e2 = d_basis.col(1);
    const Vec3 d_e3 = d_basis.col(2);
    // e3 = e1 x e2
    d_e1 += e2.cross(d_e3);
    d_e2 += d_e3.cross(e1);
    // e2 = u2 / |u2|
    const Vec3 d_u2 = (d_e2 - e2 * e2.dot(d_e2)) / n2;
    // u2 = v2 - (e1 . v2) e1
    g2 = d_u2 - e1 * e1.dot(d_u2);
    d_e1 += -v2 * e1.dot(d_u2) - e1.dot(v2) * d_u2;
    // e1 = v1 / |v1|
    g1 = (d_e1 - e1 * e1.dot(d_e1)) / n1;
}

struct Live {
    bool xy = false;
    bool z = false;
    bool rotation = false;
    bool focal = false;
};

// Accumulates scale * dL/d(delta) given dL/dR' (row-major) and dL/dt' for the
// pose (R', t') = U(state, delta).
void chain_to_delta(const ParamState &state, const DeltaTheta &delta, const ParamState &updated,
                    const std::array<double, 9> &d_r, const std::array<double, 3> &d_t, double scale, Live live,
                    DeltaVector &grad) {
    const Translation3 &t = updated.translation;
    if (live.xy) {
        grad[0] += scale * d_t[0] * t.z() / updated.focal;
        grad[1] += scale * d_t[1] * t.z() / updated.focal;
    }
    if (live.z) {
        grad[2] += scale * ((d_t[0] * t.x() + d_t[1] * t.y()) / delta.v_z + d_t[2] * state.translation.z());
    }
    if (live.focal) {
        grad[9] += -scale * (d_t[0] * t.x() + d_t[1] * t.y());
    }
    if (live.rotation) {
        Mat3 d_updated;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) d_updated(i, j) = d_r[3 * i + j];
        const Mat3 d_basis = d_updated * state.rotation.matrix().transpose();
        Vec3 g1, g2;
        gram_schmidt_vjp(delta.v_r1, delta.v_r2, d_basis, g1, g2);
        for (int i = 0; i < 3; ++i) {
            grad[3 + i] += scale * g1[i];
            grad[6 + i] += scale * g2[i];
        }
    }
}

double huber_slope(double r, double delta) {
    if (std::abs(r) <= delta) return r;
    return r > 0.0 ? delta : -delta;
}

}  // namespace

void LossWeights::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(huber_delta > 0.0)) {
        throw DomainError("loss weights: need alpha >= 0, beta >= 0, huber_delta > 0");
    }
}

DeltaVector to_vector(const DeltaTheta &d) {
    return {d.v_x, d.v_y, d.v_z, d.v_r1.x(), d.v_r1.y(), d.v_r1.z(), d.v_r2.x(), d.v_r2.y(), d.v_r2.z(), d.v_f};
}

DeltaTheta from_vector(const DeltaVector &v) {
    DeltaTheta d;
    d.v_x = v[0];
    d.v_y = v[1];
    d.v_z = v[2];
    d.v_r1 = Vec3(v[3], v[4], v[5]);
    d.v_r2 = Vec3(v[6], v[7], v[8]);
    d.v_f = v[9];
    return d;
}

std::string_view delta_component_name(std::size_t i) {
    static constexpr std::string_view kNames[kDeltaDims] = {"v_x",    "v_y",    "v_z",    "v_r1_x", "v_r1_y",
                                                            "v_r1_z", "v_r2_x", "v_r2_y", "v_r2_z", "v_f"};
    return i < kDeltaDims ? kNames[i] : std::string_view("?");
}

double huber(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_log_focal(double focal, double focal_gt, double delta) {
    if (!(focal > 0.0) || !(focal_gt > 0.0)) {
        throw DomainError("huber_log_focal: focal lengths must be positive");
    }
    return huber(std::log(focal) - std::log(focal_gt), delta);
}

double reprojection_loss(const ParamState &pred, const ParamState &gt, const ModelPoints &points) {
    return projection_l1("reprojection_loss", points, pred, gt).value;
}

double disentangled_reprojection_loss(const ParamState &pred, const ParamState &gt, const ModelPoints &points) {
    ParamState pose_part = pred;
    pose_part.focal = gt.focal;
    ParamState focal_part = gt;
    focal_part.focal = pred.focal;
    return 0.5 * reprojection_loss(pose_part, gt, points) + 0.5 * reprojection_loss(focal_part, gt, points);
}

double point_matching_distance(const Rotation &r1, const Translation3 &t1, const Rotation &r2, const Translation3 &t2,
                               const ModelPoints &points) {
    if (points.empty()) throw DomainError("point_matching_distance: empty point set");
    return kernels::active().rigid_l1(points.view(), rigid(r1, t1), rigid(r2, t2)).value /
           static_cast<double>(points.size());
}

double disentangled_pose_loss(const ParamState &state, const DeltaTheta &delta, const ParamState &gt,
                              const ModelPoints &points) {
    return total_loss(state, delta, gt, points).pose;
}

LossBreakdown total_loss(const ParamState &state, const DeltaTheta &delta, const ParamState &gt,
                         const ModelPoints &points, const LossWeights &weights) {
    weights.validate();
    delta.validate();
    if (points.empty()) throw DomainError("total_loss: empty point set");
    const DeltaTheta hat = oracle_delta(state, gt);
    const kernels::KernelTable &k = kernels::active();
    const kernels::RigidPose gt_pose = rigid(gt);
    const double inv_n = 1.0 / static_cast<double>(points.size());

    LossBreakdown out;

    // Disentangled point-matching terms; every term uses the oracle focal update.
    auto pose_term = [&](const DeltaTheta &mixed, Live live) {
        const ParamState updated = apply_update(state, mixed);
        const auto r = k.rigid_l1(points.view(), rigid(updated), gt_pose);
        chain_to_delta(state, mixed, updated, r.d_r, r.d_t, inv_n, live, out.grad_pose);
        return r.value * inv_n;
    };
    DeltaTheta xy = hat;
    xy.v_x = delta.v_x;
    xy.v_y = delta.v_y;
    out.pose_xy = pose_term(xy, Live{.xy = true});
    DeltaTheta z = hat;
    z.v_z = delta.v_z;
    out.pose_z = pose_term(z, Live{.z = true});
    DeltaTheta rot = hat;
    rot.v_r1 = delta.v_r1;
    rot.v_r2 = delta.v_r2;
    out.pose_rotation = pose_term(rot, Live{.rotation = true});
    out.pose = out.pose_xy + out.pose_z + out.pose_rotation;

    // Pose half of the disentangled reprojection loss: the predicted pose
    // rendered at the ground-truth focal length.
    DeltaTheta at_gt_focal = delta;
    at_gt_focal.v_f = hat.v_f;
    ParamState pose_part = apply_update(state, at_gt_focal);
    pose_part.focal = gt.focal;
    const auto dr_pose = projection_l1("total_loss", points, pose_part, gt);
    out.dr_pose = 0.5 * dr_pose.value;
    chain_to_delta(state, at_gt_focal, apply_update(state, at_gt_focal), dr_pose.d_r, dr_pose.d_t, 0.5,
                   Live{.xy = true, .z = true, .rotation = true}, out.grad_dr);

    // Focal half: ground-truth pose rendered at the predicted focal length.
    const double focal = apply_focal_update(state.focal, delta.v_f);
    ParamState focal_part = gt;
    focal_part.focal = focal;
    const auto dr_focal = projection_l1("total_loss", points, focal_part, gt);
    out.dr_focal = 0.5 * dr_focal.value;
    out.grad_dr[9] += 0.5 * dr_focal.d_f * focal;
    out.dr = out.dr_pose + out.dr_focal;

    out.huber = huber_log_focal(focal, gt.focal, weights.huber_delta);
    out.grad_huber[9] = huber_slope(std::log(focal) - std::log(gt.focal), weights.huber_delta);

    out.focal = weights.beta * out.huber + out.dr;
    out.total = out.pose + weights.alpha * out.focal;
    for (std::size_t i = 0; i < kDeltaDims; ++i) {
        out.grad_focal[i] = weights.beta * out.grad_huber[i] + out.grad_dr[i];
        out.grad_total[i] = out.grad_pose[i] + weights.alpha * out.grad_focal[i];
    }
    return out;
}

}  // namespace rcpose
