#pragma once

#include "rcpose/kernels/kernels.h"

namespace rcpose::kernels::detail {

// Scalar reference kernels over the index range [begin, end). The wide
// variants reuse them for the remainder lanes.
RigidL1 rigid_l1_scalar(const PointsView &pts, const RigidPose &a, const RigidPose &b, std::size_t begin);
double rigid_l2_scalar(const PointsView &pts, const RigidPose &a, const RigidPose &b, std::size_t begin);
ProjectionL1 projection_l1_scalar(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb,
                                  std::size_t begin);
ProjectionL2 projection_l2_scalar(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb,
                                  std::size_t begin);

const KernelTable *avx2_table_impl();

inline double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace rcpose::kernels::detail
