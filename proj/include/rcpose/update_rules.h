#pragma once

#include "rcpose/geometry.h"

namespace rcpose {

// Network-output surrogate: image-plane shift of the projected object center
// (pixels), depth ratio, 6D rotation update and log focal ratio.
struct DeltaTheta {
    double v_x = 0.0;
    double v_y = 0.0;
    double v_z = 1.0;
    Vec3 v_r1 = Vec3::UnitX();
    Vec3 v_r2 = Vec3::UnitY();
    double v_f = 0.0;

    static DeltaTheta identity() { return {}; }
    void validate() const;
};

enum class UpdateRule {
    exact,   // translation update uses both f^k and f^{k+1}
    legacy,  // older rule that treats the focal length as constant within a step
};

inline constexpr double kInitialFocal = 600.0;
inline constexpr double kInitialDepth = 1.0;
inline constexpr double kMinDepthRatio = 1e-6;

double apply_focal_update(double focal, double v_f);

// z' = v_z z,  x' = (v_x + f x / z) z' / f_new  (same for y).
Translation3 apply_translation_update(const ParamState &state, const DeltaTheta &delta, double f_new);

// z' = v_z z,  x' = (v_x / f_new + x / z) z'  (same for y).
Translation3 apply_legacy_translation_update(const ParamState &state, const DeltaTheta &delta, double f_new);

// R' = R(v_r1, v_r2) R.
Rotation apply_rotation_update(const Rotation &rotation, const Vec3 &v_r1, const Vec3 &v_r2);

// Focal first, then translation with the new focal, rotation independently.
ParamState apply_update(const ParamState &state, const DeltaTheta &delta, UpdateRule rule = UpdateRule::exact);

// The unique (up to the 6D encoding) update that maps `state` onto `target`
// under the exact rule. The 6D part is the first two columns of R_target R^T.
DeltaTheta oracle_delta(const ParamState &state, const ParamState &target);

// Identity rotation, depth `depth`, and (x, y) chosen so the object origin
// projects onto the bbox center.
ParamState init_state(const BBox &bbox, const CameraIntrinsics &intrinsics, double depth = kInitialDepth);

// Entry point for predictors that are not trusted: the depth ratio is clamped
// from below instead of being rejected.
DeltaTheta clamp_for_simulation(DeltaTheta delta);

}  // namespace rcpose
