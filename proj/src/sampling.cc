#include "rcpose/sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace rcpose {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double draw_normal(Rng &rng, double mean, double sigma) {
    if (sigma == 0.0) return mean;
    return std::normal_distribution<double>(mean, sigma)(rng);
}

Vec3 random_axis(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        const Vec3 v(n(rng), n(rng), n(rng));
        const double norm = v.norm();
        if (norm > 1e-12) return v / norm;
    }
}

// Uniform point in the unit disk.
Vec2 unit_disk(Rng &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        const Vec2 p(u(rng), u(rng));
        if (p.squaredNorm() <= 1.0) return p;
    }
}

// Standard deviation independent of the record order.
double order_free_std(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    std::sort(sq.begin(), sq.end());
    return std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / n);
}

// Per-coordinate absolute offsets to the nearest neighbor of every point in
// the plane, distances measured after dividing by each coordinate's spread.
// Ties are broken by the absolute offsets, which keeps the result
// independent of the input order.
void nearest_offsets(const std::vector<double> &a, const std::vector<double> &b, std::vector<double> &da,
                     std::vector<double> &db) {
    const std::size_t n = a.size();
    double sa = order_free_std(a), sb = order_free_std(b);
    if (!(sa > 0.0)) sa = 1.0;
    if (!(sb > 0.0)) sb = 1.0;
    da.assign(n, 0.0);
    db.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        double best_a = 0.0, best_b = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double ea = std::abs(a[i] - a[j]);
            const double eb = std::abs(b[i] - b[j]);
            const double d = std::hypot(ea / sa, eb / sb);
            if (d < best_d || (d == best_d && std::tie(ea, eb) < std::tie(best_a, best_b))) {
                best_d = d;
                best_a = ea;
                best_b = eb;
            }
        }
        da[i] = best_a;
        db[i] = best_b;
    }
}

void check_min_records(std::size_t have, std::size_t need, const char *what) {
    if (have < need) {
        std::ostringstream os;
        os << what << ": need at least " << need << " records, got " << have;
        throw DegenerateFitError(os.str());
    }
}

}  // namespace

void Gaussian2DParams::validate() const {
    if (!mean.allFinite() || !covariance.allFinite()) {
        throw DomainError("gaussian: non-finite parameters");
    }
    if (std::abs(covariance(0, 1) - covariance(1, 0)) > 1e-12 * covariance.cwiseAbs().maxCoeff()) {
        throw DomainError("gaussian: covariance is not symmetric");
    }
    Eigen::LLT<Eigen::Matrix2d> llt(covariance);
    if (llt.info() != Eigen::Success) {
        throw DomainError("gaussian: covariance is not positive definite");
    }
}

void NonparamDeltas::validate() const {
    for (double v : {rotation, x, y, z, focal}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DomainError("nonparametric deltas must be finite and non-negative");
        }
    }
}

void AnnotationRecord::validate() const {
    state().validate();
    bbox.validate();
    if (image_width <= 0 || image_height <= 0) {
        throw DomainError("annotation: image size must be positive");
    }
}

Gaussian2DParams fit_gaussian_2d(std::span<const Vec2> samples) {
    check_min_records(samples.size(), 3, "fit_gaussian_2d");
    Vec2 mean = Vec2::Zero();
    for (const Vec2 &s : samples) {
        if (!s.allFinite()) throw DegenerateFitError("fit_gaussian_2d: non-finite sample");
        mean += s;
    }
    mean /= static_cast<double>(samples.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Vec2 &s : samples) cov.noalias() += (s - mean) * (s - mean).transpose();
    cov /= static_cast<double>(samples.size() - 1);
    const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov, Eigen::EigenvaluesOnly).eigenvalues();
    if (!(ev[0] > 1e-12 * std::max(ev[1], std::numeric_limits<double>::min()))) {
        throw DegenerateFitError("fit_gaussian_2d: singular covariance");
    }
    Gaussian2DParams p{mean, cov};
    p.validate();
    return p;
}

std::vector<Vec2> sample_gaussian_2d(const Gaussian2DParams &params, std::size_t n, std::uint64_t seed) {
    params.validate();
    const Eigen::Matrix2d l = params.covariance.llt().matrixL();
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec2> out(n);
    for (Vec2 &v : out) {
        const double a = normal(rng);
        const double b = normal(rng);
        v = params.mean + l * Vec2(a, b);
    }
    return out;
}

TranslationFocalFit fit_translation_focal(std::span<const AnnotationRecord> records) {
    check_min_records(records.size(), 3, "fit_translation_focal");
    std::vector<Vec2> xy, zf;
    xy.reserve(records.size());
    zf.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const AnnotationRecord &r = records[i];
        if (!(r.translation.z() > 0.0) || !(r.focal > 0.0)) {
            std::ostringstream os;
            os << "fit_translation_focal: record " << i << " has non-positive depth or focal length";
            throw DomainError(os.str());
        }
        xy.emplace_back(r.translation.x(), r.translation.y());
        zf.emplace_back(std::log(r.translation.z()), std::log(r.focal));
    }
    return {fit_gaussian_2d(xy), fit_gaussian_2d(zf)};
}

ParametricPoseModel fit_parametric(std::span<const AnnotationRecord> records) {
    const TranslationFocalFit tf = fit_translation_focal(records);
    std::vector<Rotation> rotations;
    rotations.reserve(records.size());
    for (const AnnotationRecord &r : records) rotations.push_back(r.rotation);
    return {fit_bingham(std::span<const Rotation>(rotations)), tf.xy, tf.log_zf};
}

std::vector<ParamState> sample_pose_parametric(const ParametricPoseModel &model, std::size_t n, std::uint64_t seed) {
    model.xy.validate();
    model.log_zf.validate();
    const std::vector<Rotation> rotations = sample_bingham(model.rotation, n, seed);
    const std::vector<Vec2> xy = sample_gaussian_2d(model.xy, n, seed + 1);
    const std::vector<Vec2> zf = sample_gaussian_2d(model.log_zf, n, seed + 2);
    std::vector<ParamState> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].rotation = rotations[i];
        out[i].translation = Translation3(xy[i].x(), xy[i].y(), std::exp(zf[i].x()));
        out[i].focal = std::exp(zf[i].y());
    }
    return out;
}

UniformPoseRanges UniformPoseRanges::pix3d() {
    UniformPoseRanges r;
    r.z_max = 2.4;
    return r;
}

UniformPoseRanges UniformPoseRanges::stanford_cars() { return UniformPoseRanges{}; }

void UniformPoseRanges::validate() const {
    const bool ok = x_min <= x_max && y_min <= y_max && z_min <= z_max && f_min <= f_max && z_min > 0.0 &&
                    f_min > 0.0 && std::isfinite(x_min + x_max + y_min + y_max + z_max + f_max);
    if (!ok) {
        throw DomainError("uniform ranges: bounds must be ordered, finite, and positive for depth and focal");
    }
}

Rotation uniform_rotation(Rng &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
    return Rotation::from_quaternion(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
}

std::vector<ParamState> sample_pose_uniform(const UniformPoseRanges &ranges, std::size_t n, std::uint64_t seed) {
    ranges.validate();
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> ux(ranges.x_min, ranges.x_max);
    std::uniform_real_distribution<double> uy(ranges.y_min, ranges.y_max);
    std::uniform_real_distribution<double> uz(ranges.z_min, ranges.z_max);
    std::uniform_real_distribution<double> uf(ranges.f_min, ranges.f_max);
    std::vector<ParamState> out(n);
    for (ParamState &s : out) {
        s.rotation = uniform_rotation(rng);
        const double x = ux(rng), y = uy(rng), z = uz(rng);
        s.translation = Translation3(x, y, z);
        s.focal = uf(rng);
    }
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

NonparamDeltas select_deltas_95pct(std::span<const AnnotationRecord> records) {
    check_min_records(records.size(), 2, "select_deltas_95pct");
    const std::size_t n = records.size();
    std::vector<double> x(n), y(n), z(n), f(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = records[i].translation.x();
        y[i] = records[i].translation.y();
        z[i] = records[i].translation.z();
        f[i] = records[i].focal;
    }
    std::vector<double> dx, dy, dz, df;
    nearest_offsets(z, f, dz, df);
    nearest_offsets(x, y, dx, dy);
    std::vector<double> dr(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dr[i] = std::min(dr[i], geodesic_distance(records[i].rotation, records[j].rotation));
        }
    }
    constexpr double kQ = 95.0;
    return {percentile(dr, kQ), percentile(dx, kQ), percentile(dy, kQ), percentile(dz, kQ), percentile(df, kQ)};
}

std::vector<ParamState> sample_pose_nonparametric(std::span<const AnnotationRecord> records,
                                                  const NonparamDeltas &deltas, std::size_t n, std::uint64_t seed) {
    if (records.empty()) throw DegenerateFitError("sample_pose_nonparametric: no records");
    deltas.validate();
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
    std::uniform_real_distribution<double> angle(0.0, deltas.rotation);
    std::vector<ParamState> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        bool done = false;
        for (int attempt = 0; attempt < kMaxResampleAttempts && !done; ++attempt) {
            const AnnotationRecord &r = records[pick(rng)];
            const Vec3 axis = random_axis(rng);
            const double a = angle(rng);
            const Vec2 ezf = unit_disk(rng);
            const Vec2 exy = unit_disk(rng);
            ParamState s;
            s.rotation = a == 0.0 ? r.rotation : Rotation::from_axis_angle(axis, a) * r.rotation;
            s.translation = Translation3(r.translation.x() + deltas.x * exy.x(), r.translation.y() + deltas.y * exy.y(),
                                         r.translation.z() + deltas.z * ezf.x());
            s.focal = r.focal + deltas.focal * ezf.y();
            if (s.translation.z() > 0.0 && s.focal > 0.0) {
                out.push_back(s);
                done = true;
            }
        }
        if (!done) {
            std::ostringstream os;
            os << "sample_pose_nonparametric: draw " << k << " kept a non-positive depth or focal length after "
               << kMaxResampleAttempts << " attempts";
            throw DomainError(os.str());
        }
    }
    return out;
}

double RefinerNoise::focal_sigma(double focal_gt) const {
    const double v = focal_rel * focal_gt;
    return focal_reading == NoiseReading::std_dev ? v : std::sqrt(v);
}

double RefinerNoise::euler_sigma_rad() const {
    const double deg = euler_reading == NoiseReading::std_dev ? euler_deg : std::sqrt(euler_deg);
    return deg * kDegToRad;
}

ParamState sample_refiner_noise(const ParamState &gt, Rng &rng, const RefinerNoise &noise) {
    gt.validate();
    const auto positive = [&](double mean, double sigma, const char *what) {
        for (int attempt = 0; attempt < kMaxResampleAttempts; ++attempt) {
            const double v = draw_normal(rng, mean, sigma);
            if (v > 0.0) return v;
        }
        throw DomainError(std::string("sample_refiner_noise: no positive ") + what + " after resampling");
    };
    ParamState s = gt;
    s.focal = positive(gt.focal, noise.focal_sigma(gt.focal), "focal length");
    s.translation.x() = draw_normal(rng, gt.translation.x(), noise.xy_m);
    s.translation.y() = draw_normal(rng, gt.translation.y(), noise.xy_m);
    s.translation.z() = positive(gt.translation.z(), noise.z_m, "depth");
    const double sr = noise.euler_sigma_rad();
    if (sr > 0.0) {
        const double a = draw_normal(rng, 0.0, sr);
        const double b = draw_normal(rng, 0.0, sr);
        const double c = draw_normal(rng, 0.0, sr);
        s.rotation = Rotation::from_euler_xyz(a, b, c) * gt.rotation;
    }
    return s;
}

ParamState sample_refiner_noise(const ParamState &gt, std::uint64_t seed, const RefinerNoise &noise) {
    Rng rng = make_rng(seed);
    return sample_refiner_noise(gt, rng, noise);
}

}  // namespace rcpose
