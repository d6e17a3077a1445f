#include "rcpose/update_rules.h"

#include <algorithm>
#include <cmath>

namespace rcpose {

namespace {

void check_translation_inputs(const ParamState &state, const DeltaTheta &delta, double f_new) {
    state.validate();
    if (!(delta.v_z > 0.0) || !std::isfinite(delta.v_z)) {
        throw DomainError("translation update: depth ratio v_z must be positive and finite");
    }
    if (!std::isfinite(delta.v_x) || !std::isfinite(delta.v_y)) {
        throw DomainError("translation update: non-finite pixel shift");
    }
    if (!(f_new > 0.0) || !std::isfinite(f_new)) {
        throw DomainError("translation update: new focal length must be positive and finite");
    }
}

}  // namespace

void DeltaTheta::validate() const {
    if (!std::isfinite(v_x) || !std::isfinite(v_y) || !std::isfinite(v_f) || !v_r1.allFinite() ||
        !v_r2.allFinite()) {
        throw DomainError("delta: non-finite component");
    }
    if (!(v_z > 0.0) || !std::isfinite(v_z)) {
        throw DomainError("delta: depth ratio v_z must be positive");
    }
    // Throws on a degenerate 6D pair.
    (void)rotation_matrix_from_6d(v_r1, v_r2);
}

double apply_focal_update(double focal, double v_f) {
    if (!(focal > 0.0) || !std::isfinite(focal)) {
        throw DomainError("focal update: focal length must be positive and finite");
    }
    if (!std::isfinite(v_f)) {
        throw DomainError("focal update: non-finite v_f");
    }
    return std::exp(v_f) * focal;
}

Translation3 apply_translation_update(const ParamState &state, const DeltaTheta &delta, double f_new) {
    check_translation_inputs(state, delta, f_new);
    const Translation3 &t = state.translation;
    const double f = state.focal;
    const double z_new = delta.v_z * t.z();
    return Translation3((delta.v_x + f * t.x() / t.z()) * z_new / f_new, (delta.v_y + f * t.y() / t.z()) * z_new / f_new,
                        z_new);
}

Translation3 apply_legacy_translation_update(const ParamState &state, const DeltaTheta &delta, double f_new) {
    check_translation_inputs(state, delta, f_new);
    const Translation3 &t = state.translation;
    const double z_new = delta.v_z * t.z();
    return Translation3((delta.v_x / f_new + t.x() / t.z()) * z_new, (delta.v_y / f_new + t.y() / t.z()) * z_new,
                        z_new);
}

Rotation apply_rotation_update(const Rotation &rotation, const Vec3 &v_r1, const Vec3 &v_r2) {
    return Rotation::from_matrix(rotation_matrix_from_6d(v_r1, v_r2) * rotation.matrix());
}

ParamState apply_update(const ParamState &state, const DeltaTheta &delta, UpdateRule rule) {
    ParamState next;
    next.focal = apply_focal_update(state.focal, delta.v_f);
    next.translation = rule == UpdateRule::exact ? apply_translation_update(state, delta, next.focal)
                                                 : apply_legacy_translation_update(state, delta, next.focal);
    next.rotation = apply_rotation_update(state.rotation, delta.v_r1, delta.v_r2);
    return next;
}

DeltaTheta oracle_delta(const ParamState &state, const ParamState &target) {
    state.validate();
    target.validate();
    const Translation3 &t = state.translation;
    const Translation3 &g = target.translation;
    DeltaTheta d;
    d.v_f = std::log(target.focal / state.focal);
    d.v_z = g.z() / t.z();
    d.v_x = target.focal * g.x() / g.z() - state.focal * t.x() / t.z();
    d.v_y = target.focal * g.y() / g.z() - state.focal * t.y() / t.z();
    const Mat3 rel = target.rotation.matrix() * state.rotation.matrix().transpose();
    d.v_r1 = rel.col(0);
    d.v_r2 = rel.col(1);
    return d;
}

ParamState init_state(const BBox &bbox, const CameraIntrinsics &intrinsics, double depth) {
    bbox.validate();
    intrinsics.validate();
    if (!(depth > 0.0)) {
        throw DomainError("init_state: depth must be positive");
    }
    const Vec2 c = bbox.center();
    ParamState s;
    s.focal = intrinsics.focal;
    s.rotation = Rotation();
    s.translation = Translation3((c.x() - intrinsics.cx) * depth / intrinsics.focal,
                                 (c.y() - intrinsics.cy) * depth / intrinsics.focal, depth);
    return s;
}

DeltaTheta clamp_for_simulation(DeltaTheta delta) {
    if (std::isfinite(delta.v_z)) {
        delta.v_z = std::max(delta.v_z, kMinDepthRatio);
    }
    return delta;
}

}  // namespace rcpose
