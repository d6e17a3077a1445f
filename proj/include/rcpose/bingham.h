#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rcpose/geometry.h"

namespace rcpose {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

// Bingham distribution on S^3 with density proportional to
// exp(q^T Mb diag(z) Mb^T q). Columns of Mb are ordered by increasing
// concentration weight, so the last column is the mode and z[3] == 0.
struct BinghamParams {
    Mat4 mb = Mat4::Identity();
    Vec4 z = Vec4::Zero();

    Vec4 mode() const { return mb.col(3); }
    void validate() const;
};

inline constexpr double kMinConcentration = -900.0;

// ln C(z) for the density exp(sum_i z_i x_i^2) with respect to the surface
// measure of S^3, by the third-order saddle-point approximation.
double bingham_log_normalizer(const Vec4 &z);

// E[x_i^2] under the same density, from ratios of saddle-point integrals.
Vec4 bingham_second_moments(const Vec4 &z);

double bingham_log_density(const BinghamParams &params, const Vec4 &q);

// Maximum-likelihood fit. Mb comes from the eigenvectors of the scatter
// sum q q^T; concentrations are clamped to [kMinConcentration, 0].
BinghamParams fit_bingham(std::span<const Vec4> quaternions);
BinghamParams fit_bingham(std::span<const Rotation> rotations);

// Exact rejection sampler with an angular central Gaussian envelope.
std::vector<Vec4> sample_bingham_quaternions(const BinghamParams &params, std::size_t n, std::uint64_t seed);
std::vector<Rotation> sample_bingham(const BinghamParams &params, std::size_t n, std::uint64_t seed);

}  // namespace rcpose
