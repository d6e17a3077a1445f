#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcpose/bingham.h"
#include "rcpose/geometry.h"
#include "rcpose/random.h"

namespace rcpose {

struct Gaussian2DParams {
    Vec2 mean = Vec2::Zero();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();

    void validate() const;
};

struct NonparamDeltas {
    double rotation = 0.0;  // radians
    double x = 0.0;         // meters
    double y = 0.0;
    double z = 0.0;
    double focal = 0.0;  // pixels

    void validate() const;
};

// One annotated training image.
struct AnnotationRecord {
    Rotation rotation;
    Translation3 translation = Translation3(0.0, 0.0, 1.0);
    double focal = 600.0;
    int image_width = 0;
    int image_height = 0;
    BBox bbox;

    ParamState state() const { return {rotation, translation, focal}; }
    void validate() const;
};

struct ParametricPoseModel {
    BinghamParams rotation;
    Gaussian2DParams xy;       // (x, y) in meters
    Gaussian2DParams log_zf;   // (ln z, ln f)
};

Gaussian2DParams fit_gaussian_2d(std::span<const Vec2> samples);
std::vector<Vec2> sample_gaussian_2d(const Gaussian2DParams &params, std::size_t n, std::uint64_t seed);

struct TranslationFocalFit {
    Gaussian2DParams xy;
    Gaussian2DParams log_zf;
};
TranslationFocalFit fit_translation_focal(std::span<const AnnotationRecord> records);

// Bingham rotations, Gaussian (x, y) and exponentiated Gaussian (ln z, ln f).
ParametricPoseModel fit_parametric(std::span<const AnnotationRecord> records);
std::vector<ParamState> sample_pose_parametric(const ParametricPoseModel &model, std::size_t n, std::uint64_t seed);

struct UniformPoseRanges {
    double x_min = -0.075, x_max = 0.075;  // 15 cm box
    double y_min = -0.075, y_max = 0.075;
    double z_min = 0.8, z_max = 3.0;
    double f_min = 200.0, f_max = 1000.0;

    static UniformPoseRanges pix3d();
    static UniformPoseRanges stanford_cars();
    void validate() const;
};

// Haar-uniform rotation by the subgroup algorithm.
Rotation uniform_rotation(Rng &rng);
std::vector<ParamState> sample_pose_uniform(const UniformPoseRanges &ranges, std::size_t n, std::uint64_t seed);

// For each record its nearest neighbor is found separately in (z, f), (x, y)
// (both after scaling each coordinate by its standard deviation over the
// records) and in rotation (geodesic angle). Each delta is the 95th
// percentile of the per-coordinate distances to those neighbors.
NonparamDeltas select_deltas_95pct(std::span<const AnnotationRecord> records);

inline constexpr int kMaxResampleAttempts = 100;

// Random record perturbed by a rotation of at most delta.rotation about a
// random axis and by uniform offsets inside the (z, f) and (x, y) ellipses.
std::vector<ParamState> sample_pose_nonparametric(std::span<const AnnotationRecord> records,
                                                  const NonparamDeltas &deltas, std::size_t n, std::uint64_t seed);

// How the "variance" figures of the refiner noise model are read.
enum class NoiseReading {
    std_dev,   // sigma = value
    variance,  // sigma = sqrt(value)
};

struct RefinerNoise {
    double focal_rel = 0.15;  // times f_gt
    double xy_m = 0.01;
    double z_m = 0.05;
    double euler_deg = 15.0;
    NoiseReading focal_reading = NoiseReading::std_dev;
    NoiseReading euler_reading = NoiseReading::std_dev;

    double focal_sigma(double focal_gt) const;
    double euler_sigma_rad() const;
};

ParamState sample_refiner_noise(const ParamState &gt, Rng &rng, const RefinerNoise &noise = {});
ParamState sample_refiner_noise(const ParamState &gt, std::uint64_t seed, const RefinerNoise &noise = {});

// Linear-interpolation percentile of `values` (q in [0, 100]).
double percentile(std::vector<double> values, double q);

}  // namespace rcpose
