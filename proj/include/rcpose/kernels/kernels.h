#pragma once

// Per-point reductions over a model point cloud. Every kernel has a scalar
// reference implementation; wider variants are selected at runtime and must
// agree with the reference up to summation-order rounding.

#include <array>
#include <cstddef>
#include <string_view>

namespace rcpose::kernels {

struct PointsView {
    const double *x = nullptr;
    const double *y = nullptr;
    const double *z = nullptr;
    std::size_t n = 0;
};

// Rigid transform P = R p + t with R stored row-major.
struct RigidPose {
    std::array<double, 9> r{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::array<double, 3> t{0, 0, 0};
};

// sum_p ||(A p + a) - (B p + b)||_1 and its gradient with respect to (A, a).
struct RigidL1 {
    double value = 0.0;
    std::array<double, 9> d_r{};
    std::array<double, 3> d_t{};
};

// sum_p ||pi(fa, A, a, p) - pi(fb, B, b, p)||_1 (principal point at the origin)
// and its gradient with respect to (A, a, fa). min_depth covers both poses.
struct ProjectionL1 {
    double value = 0.0;
    std::array<double, 9> d_r{};
    std::array<double, 3> d_t{};
    double d_f = 0.0;
    double min_depth = 0.0;
};

struct ProjectionL2 {
    double value = 0.0;
    double min_depth = 0.0;
};

struct KernelTable {
    std::string_view name;
    RigidL1 (*rigid_l1)(const PointsView &, const RigidPose &a, const RigidPose &b);
    double (*rigid_l2)(const PointsView &, const RigidPose &a, const RigidPose &b);
    ProjectionL1 (*projection_l1)(const PointsView &, const RigidPose &a, double fa, const RigidPose &b, double fb);
    ProjectionL2 (*projection_l2)(const PointsView &, const RigidPose &a, double fa, const RigidPose &b, double fb);
};

const KernelTable &scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable *avx2_table();

// Table used by the library. Chosen once from the CPU features; the
// RCPOSE_KERNELS environment variable ("scalar" or "avx2") overrides it.
const KernelTable &active();
// Process-wide override, mainly for tests. Passing nullptr restores automatic selection.
void set_active(const KernelTable *table);

}  // namespace rcpose::kernels
