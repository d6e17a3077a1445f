#include "rcpose/bingham.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "rcpose/random.h"

namespace rcpose {

namespace {

constexpr std::size_t kMinFitSamples = 5;
// Shift applied to -z so that every saddle-point rate is positive.
constexpr double kShift = 1.0;

using VecX = Eigen::VectorXd;

// Derivatives of the cumulant generating function of sum_i y_i^2 with
// y_i ~ N(0, 1 / (2 lambda_i)): K^(j)(t) = sum (j-1)! / 2 / (lambda_i - t)^j.
double cgf_derivative(const VecX &lambda, double t, int order) {
    double fact = 1.0;
    for (int k = 2; k < order; ++k) fact *= k;
    double s = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) s += 1.0 / std::pow(lambda[i] - t, order);
    return 0.5 * fact * s;
}

double cgf(const VecX &lambda, double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) s += std::log1p(-t / lambda[i]);
    return -0.5 * s;
}

// Root of K'(t) = 1 on (-inf, min lambda).
double saddle_point(const VecX &lambda) {
    const double lmin = lambda.minCoeff();
    const double p = static_cast<double>(lambda.size());
    // K'(lmin - p/2) <= 1 and K'(lmin - 1/4) >= 2, so this brackets the root.
    double lo = lmin - 0.5 * p;
    double hi = lmin - 0.25;
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double g = cgf_derivative(lambda, t, 1) - 1.0;
        if (g > 0.0) {
            hi = t;
        } else {
            lo = t;
        }
        double next = t - g / cgf_derivative(lambda, t, 2);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t))) return next;
        t = next;
    }
    return t;
}

// Third-order saddle-point approximation of ln of the integral of
// exp(-x^T diag(lambda) x) over the unit sphere in R^p, lambda > 0.
double log_sphere_integral(const VecX &lambda) {
    const double p = static_cast<double>(lambda.size());
    const double t = saddle_point(lambda);
    const double k2 = cgf_derivative(lambda, t, 2);
    const double k3 = cgf_derivative(lambda, t, 3);
    const double k4 = cgf_derivative(lambda, t, 4);
    const double rho3 = k3 / std::pow(k2, 1.5);
    const double rho4 = k4 / (k2 * k2);
    const double correction = rho4 / 8.0 - 5.0 * rho3 * rho3 / 24.0;
    return std::log(2.0) + 0.5 * p * std::log(std::numbers::pi) - 0.5 * lambda.array().log().sum() -
           0.5 * std::log(2.0 * std::numbers::pi * k2) + cgf(lambda, t) - t + correction;
}

VecX shifted_rates(const Vec4 &z) { return (-(z.array() - z.maxCoeff()) + kShift).matrix(); }

Mat4 sorted_scatter_basis(std::span<const Vec4> q, Vec4 &eigenvalues) {
    Mat4 s = Mat4::Zero();
    for (const Vec4 &v : q) {
        const Vec4 u = v.normalized();
        s.noalias() += u * u.transpose();
    }
    s /= static_cast<double>(q.size());
    Eigen::SelfAdjointEigenSolver<Mat4> es(s);
    if (es.info() != Eigen::Success) {
        throw DegenerateFitError("fit_bingham: eigen decomposition failed");
    }
    eigenvalues = es.eigenvalues().cwiseMax(0.0);  // ascending
    Mat4 mb = es.eigenvectors();
    for (int c = 0; c < 4; ++c) {
        // Deterministic sign: largest-magnitude entry positive.
        Eigen::Index idx;
        mb.col(c).cwiseAbs().maxCoeff(&idx);
        if (mb(idx, c) < 0.0) mb.col(c) = -mb.col(c);
    }
    return mb;
}

Eigen::Vector3d project(Eigen::Vector3d z) {
    for (int i = 0; i < 3; ++i) z[i] = std::clamp(z[i], kMinConcentration, 0.0);
    return z;
}

Eigen::Vector3d moment_residual(const Eigen::Vector3d &z, const Eigen::Vector3d &s) {
    const Vec4 m = bingham_second_moments(Vec4(z[0], z[1], z[2], 0.0));
    return m.head<3>() - s;
}

// The likelihood equations E[x_i^2] = s_i, solved by projected Newton on the
// box [kMinConcentration, 0]^3 with a backtracking search on the residual norm.
Eigen::Vector3d solve_concentrations(const Eigen::Vector3d &s) {
    Eigen::Vector3d z;
    for (int i = 0; i < 3; ++i) {
        // Gaussian approximation of each weak axis as the starting point.
        z[i] = -0.5 / std::max(s[i], 1e-300) + 0.5 / std::max(1.0 - s.sum(), 1e-300);
    }
    z = project(z);
    Eigen::Vector3d r = moment_residual(z, s);
    for (int it = 0; it < 100 && r.norm() > 1e-13; ++it) {
        Eigen::Matrix3d jac;
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(z[j]));
            Eigen::Vector3d zp = z, zm = z;
            zp[j] += h;
            zm[j] -= h;
            jac.col(j) = (moment_residual(zp, s) - moment_residual(zm, s)) / (2.0 * h);
        }
        // Moments increase with z_i, so a component pinned at a bound whose
        // residual pushes past it is frozen.
        for (int i = 0; i < 3; ++i) {
            const bool at_top = z[i] >= 0.0 && r[i] < 0.0;
            const bool at_bottom = z[i] <= kMinConcentration && r[i] > 0.0;
            if (at_top || at_bottom) {
                jac.row(i).setZero();
                jac.col(i).setZero();
                jac(i, i) = 1.0;
                r[i] = 0.0;
            }
        }
        if (r.norm() <= 1e-13) break;
        const Eigen::Vector3d step = -jac.colPivHouseholderQr().solve(r);
        if (!step.allFinite()) break;
        const double r0 = moment_residual(z, s).norm();
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Eigen::Vector3d zn = project(z + alpha * step);
            const Eigen::Vector3d rn = moment_residual(zn, s);
            if (rn.norm() < r0) {
                moved = (zn - z).norm() > 1e-14 * std::max(1.0, z.norm());
                z = zn;
                r = rn;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved) break;
    }
    return z;
}

}  // namespace

void BinghamParams::validate() const {
    if (!mb.allFinite() || !z.allFinite()) {
        throw DomainError("bingham: non-finite parameters");
    }
    if (((mb.transpose() * mb) - Mat4::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
        throw DomainError("bingham: Mb is not orthogonal");
    }
    if (z[3] != 0.0 || !(z[0] <= z[1] && z[1] <= z[2] && z[2] <= 0.0)) {
        throw DomainError("bingham: concentrations must satisfy z1 <= z2 <= z3 <= z4 = 0");
    }
}

double bingham_log_normalizer(const Vec4 &z) {
    return log_sphere_integral(shifted_rates(z)) + kShift + z.maxCoeff();
}

Vec4 bingham_second_moments(const Vec4 &z) {
    // E[x_i^2] = I_6(lambda, lambda_i, lambda_i) / (2 pi I_4(lambda)), with
    // both integrals approximated and the result renormalized to sum to one.
    const VecX lambda = shifted_rates(z);
    const double base = log_sphere_integral(lambda);
    Vec4 m;
    VecX ext(6);
    ext.head<4>() = lambda;
    for (int i = 0; i < 4; ++i) {
        ext[4] = ext[5] = lambda[i];
        m[i] = std::exp(log_sphere_integral(ext) - base) / (2.0 * std::numbers::pi);
    }
    return m / m.sum();
}

double bingham_log_density(const BinghamParams &params, const Vec4 &q) {
    const Vec4 u = params.mb.transpose() * q;
    return u.cwiseProduct(u).dot(params.z) - bingham_log_normalizer(params.z);
}

BinghamParams fit_bingham(std::span<const Vec4> quaternions) {
    if (quaternions.size() < kMinFitSamples) {
        std::ostringstream os;
        os << "fit_bingham: need at least " << kMinFitSamples << " samples, got " << quaternions.size();
        throw DegenerateFitError(os.str());
    }
    for (const Vec4 &q : quaternions) {
        if (!q.allFinite() || q.norm() < 1e-12) {
            throw DegenerateFitError("fit_bingham: zero or non-finite quaternion");
        }
    }
    Vec4 ev;
    BinghamParams p;
    p.mb = sorted_scatter_basis(quaternions, ev);
    const Eigen::Vector3d z = solve_concentrations(Eigen::Vector3d(ev[0], ev[1], ev[2]));
    // Keep the ordering invariant exactly despite solver round-off.
    p.z = Vec4(z[0], std::max(z[0], z[1]), std::max({z[0], z[1], z[2]}), 0.0);
    return p;
}

BinghamParams fit_bingham(std::span<const Rotation> rotations) {
    std::vector<Vec4> q;
    q.reserve(rotations.size());
    for (const Rotation &r : rotations) {
        const auto &h = r.quaternion();
        q.emplace_back(h.w(), h.x(), h.y(), h.z());
    }
    return fit_bingham(std::span<const Vec4>(q));
}

std::vector<Vec4> sample_bingham_quaternions(const BinghamParams &params, std::size_t n, std::uint64_t seed) {
    params.validate();
    constexpr double kDim = 4.0;
    // Work in the Mb frame where the target is exp(-x^T diag(a) x), a = -z >= 0.
    const Vec4 a = -params.z;
    // b solves sum 1 / (b + 2 a_i) = 1 on (0, 4].
    double lo = 1e-12, hi = kDim;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += 1.0 / (mid + 2.0 * a[i]);
        (s > 1.0 ? lo : hi) = mid;
    }
    const double b = 0.5 * (lo + hi);
    const Vec4 omega = (Vec4::Ones().array() + 2.0 * a.array() / b).matrix();
    const Vec4 sigma = omega.cwiseInverse().cwiseSqrt();
    const double log_m = -0.5 * (kDim - b) + 0.5 * kDim * std::log(kDim / b);

    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Vec4> out;
    out.reserve(n);
    while (out.size() < n) {
        Vec4 y;
        for (int i = 0; i < 4; ++i) y[i] = sigma[i] * normal(rng);
        const double norm = y.norm();
        if (norm == 0.0) continue;
        const Vec4 x = y / norm;
        const Vec4 x2 = x.cwiseProduct(x);
        const double log_target = -x2.dot(a);
        const double log_envelope = -0.5 * kDim * std::log(x2.dot(omega)) + log_m;
        if (std::log(unif(rng)) < log_target - log_envelope) {
            out.push_back(params.mb * x);
        }
    }
    return out;
}

std::vector<Rotation> sample_bingham(const BinghamParams &params, std::size_t n, std::uint64_t seed) {
    const std::vector<Vec4> q = sample_bingham_quaternions(params, n, seed);
    std::vector<Rotation> out;
    out.reserve(q.size());
    for (const Vec4 &v : q) out.push_back(Rotation::from_quaternion(v[0], v[1], v[2], v[3]));
    return out;
}

}  // namespace rcpose
