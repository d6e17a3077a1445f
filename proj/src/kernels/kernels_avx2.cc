// AVX2 variants: four points per iteration. Per-point arithmetic matches the
// scalar reference operation for operation; only the summation order differs.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "kernels_impl.h"

namespace rcpose::kernels {

namespace {

struct Pose4 {
    __m256d r[9];
    __m256d t[3];

    explicit Pose4(const RigidPose &pose) {
        for (int i = 0; i < 9; ++i) r[i] = _mm256_set1_pd(pose.r[i]);
        for (int i = 0; i < 3; ++i) t[i] = _mm256_set1_pd(pose.t[i]);
    }

    void apply(__m256d px, __m256d py, __m256d pz, __m256d out[3]) const {
        for (int row = 0; row < 3; ++row) {
            __m256d acc = _mm256_mul_pd(r[3 * row], px);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(r[3 * row + 1], py));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(r[3 * row + 2], pz));
            out[row] = _mm256_add_pd(acc, t[row]);
        }
    }
};

inline __m256d abs4(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

inline __m256d sign4(__m256d v) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_GT_OQ), one);
    const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_LT_OQ), one);
    return _mm256_sub_pd(pos, neg);
}

inline double hsum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

inline double hmin(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return std::fmin(std::fmin(lanes[0], lanes[1]), std::fmin(lanes[2], lanes[3]));
}

inline std::size_t vector_end(std::size_t n) { return n - n % 4; }

RigidL1 rigid_l1(const PointsView &pts, const RigidPose &a, const RigidPose &b) {
    const Pose4 pa(a);
    const Pose4 pb(b);
    const std::size_t end = vector_end(pts.n);
    __m256d value = _mm256_setzero_pd();
    __m256d d_t[3] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd()};
    __m256d d_r[9];
    for (auto &v : d_r) v = _mm256_setzero_pd();

    for (std::size_t i = 0; i < end; i += 4) {
        const __m256d p[3] = {_mm256_loadu_pd(pts.x + i), _mm256_loadu_pd(pts.y + i), _mm256_loadu_pd(pts.z + i)};
        __m256d qa[3];
        __m256d qb[3];
        pa.apply(p[0], p[1], p[2], qa);
        pb.apply(p[0], p[1], p[2], qb);
        for (int row = 0; row < 3; ++row) {
            const __m256d d = _mm256_sub_pd(qa[row], qb[row]);
            value = _mm256_add_pd(value, abs4(d));
            const __m256d s = sign4(d);
            d_t[row] = _mm256_add_pd(d_t[row], s);
            for (int col = 0; col < 3; ++col) {
                d_r[3 * row + col] = _mm256_add_pd(d_r[3 * row + col], _mm256_mul_pd(s, p[col]));
            }
        }
    }

    RigidL1 out = detail::rigid_l1_scalar(pts, a, b, end);
    out.value += hsum(value);
    for (int i = 0; i < 3; ++i) out.d_t[i] += hsum(d_t[i]);
    for (int i = 0; i < 9; ++i) out.d_r[i] += hsum(d_r[i]);
    return out;
}

double rigid_l2(const PointsView &pts, const RigidPose &a, const RigidPose &b) {
    const Pose4 pa(a);
    const Pose4 pb(b);
    const std::size_t end = vector_end(pts.n);
    __m256d sum = _mm256_setzero_pd();
    for (std::size_t i = 0; i < end; i += 4) {
        const __m256d px = _mm256_loadu_pd(pts.x + i);
        const __m256d py = _mm256_loadu_pd(pts.y + i);
        const __m256d pz = _mm256_loadu_pd(pts.z + i);
        __m256d qa[3];
        __m256d qb[3];
        pa.apply(px, py, pz, qa);
        pb.apply(px, py, pz, qb);
        const __m256d dx = _mm256_sub_pd(qa[0], qb[0]);
        const __m256d dy = _mm256_sub_pd(qa[1], qb[1]);
        const __m256d dz = _mm256_sub_pd(qa[2], qb[2]);
        __m256d sq = _mm256_mul_pd(dx, dx);
        sq = _mm256_add_pd(sq, _mm256_mul_pd(dy, dy));
        sq = _mm256_add_pd(sq, _mm256_mul_pd(dz, dz));
        sum = _mm256_add_pd(sum, _mm256_sqrt_pd(sq));
    }
    return detail::rigid_l2_scalar(pts, a, b, end) + hsum(sum);
}

ProjectionL1 projection_l1(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb) {
    const Pose4 pa(a);
    const Pose4 pb(b);
    const __m256d fa4 = _mm256_set1_pd(fa);
    const __m256d fb4 = _mm256_set1_pd(fb);
    const __m256d one = _mm256_set1_pd(1.0);
    const std::size_t end = vector_end(pts.n);

    __m256d value = _mm256_setzero_pd();
    __m256d d_f = _mm256_setzero_pd();
    __m256d min_depth = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d d_t[3] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd()};
    __m256d d_r[9];
    for (auto &v : d_r) v = _mm256_setzero_pd();

    for (std::size_t i = 0; i < end; i += 4) {
        const __m256d p[3] = {_mm256_loadu_pd(pts.x + i), _mm256_loadu_pd(pts.y + i), _mm256_loadu_pd(pts.z + i)};
        __m256d qa[3];
        __m256d qb[3];
        pa.apply(p[0], p[1], p[2], qa);
        pb.apply(p[0], p[1], p[2], qb);
        min_depth = _mm256_min_pd(min_depth, _mm256_min_pd(qa[2], qb[2]));

        const __m256d inv_za = _mm256_div_pd(one, qa[2]);
        const __m256d inv_zb = _mm256_div_pd(one, qb[2]);
        const __m256d ua = _mm256_mul_pd(qa[0], inv_za);
        const __m256d va = _mm256_mul_pd(qa[1], inv_za);
        const __m256d du = _mm256_sub_pd(_mm256_mul_pd(fa4, ua), _mm256_mul_pd(fb4, _mm256_mul_pd(qb[0], inv_zb)));
        const __m256d dv = _mm256_sub_pd(_mm256_mul_pd(fa4, va), _mm256_mul_pd(fb4, _mm256_mul_pd(qb[1], inv_zb)));
        value = _mm256_add_pd(value, _mm256_add_pd(abs4(du), abs4(dv)));

        const __m256d su = sign4(du);
        const __m256d sv = sign4(dv);
        const __m256d gx = _mm256_mul_pd(_mm256_mul_pd(su, fa4), inv_za);
        const __m256d gy = _mm256_mul_pd(_mm256_mul_pd(sv, fa4), inv_za);
        const __m256d gz =
            _mm256_sub_pd(_mm256_setzero_pd(), _mm256_add_pd(_mm256_mul_pd(gx, ua), _mm256_mul_pd(gy, va)));
        const __m256d g[3] = {gx, gy, gz};
        for (int row = 0; row < 3; ++row) {
            d_t[row] = _mm256_add_pd(d_t[row], g[row]);
            for (int col = 0; col < 3; ++col) {
                d_r[3 * row + col] = _mm256_add_pd(d_r[3 * row + col], _mm256_mul_pd(g[row], p[col]));
            }
        }
        d_f = _mm256_add_pd(d_f, _mm256_add_pd(_mm256_mul_pd(su, ua), _mm256_mul_pd(sv, va)));
    }

    ProjectionL1 out = detail::projection_l1_scalar(pts, a, fa, b, fb, end);
    out.value += hsum(value);
    out.d_f += hsum(d_f);
    out.min_depth = std::fmin(out.min_depth, hmin(min_depth));
    for (int i = 0; i < 3; ++i) out.d_t[i] += hsum(d_t[i]);
    for (int i = 0; i < 9; ++i) out.d_r[i] += hsum(d_r[i]);
    return out;
}

ProjectionL2 projection_l2(const PointsView &pts, const RigidPose &a, double fa, const RigidPose &b, double fb) {
    const Pose4 pa(a);
    const Pose4 pb(b);
    const __m256d fa4 = _mm256_set1_pd(fa);
    const __m256d fb4 = _mm256_set1_pd(fb);
    const std::size_t end = vector_end(pts.n);
    __m256d sum = _mm256_setzero_pd();
    __m256d min_depth = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < end; i += 4) {
        const __m256d px = _mm256_loadu_pd(pts.x + i);
        const __m256d py = _mm256_loadu_pd(pts.y + i);
        const __m256d pz = _mm256_loadu_pd(pts.z + i);
        __m256d qa[3];
        __m256d qb[3];
        pa.apply(px, py, pz, qa);
        pb.apply(px, py, pz, qb);
        min_depth = _mm256_min_pd(min_depth, _mm256_min_pd(qa[2], qb[2]));
        const __m256d du = _mm256_sub_pd(_mm256_mul_pd(fa4, _mm256_div_pd(qa[0], qa[2])),
                                         _mm256_mul_pd(fb4, _mm256_div_pd(qb[0], qb[2])));
        const __m256d dv = _mm256_sub_pd(_mm256_mul_pd(fa4, _mm256_div_pd(qa[1], qa[2])),
                                         _mm256_mul_pd(fb4, _mm256_div_pd(qb[1], qb[2])));
        const __m256d sq = _mm256_add_pd(_mm256_mul_pd(du, du), _mm256_mul_pd(dv, dv));
        sum = _mm256_add_pd(sum, _mm256_sqrt_pd(sq));
    }
    ProjectionL2 out = detail::projection_l2_scalar(pts, a, fa, b, fb, end);
    out.value += hsum(sum);
    out.min_depth = std::fmin(out.min_depth, hmin(min_depth));
    return out;
}

constexpr KernelTable kAvx2{"avx2", &rigid_l1, &rigid_l2, &projection_l1, &projection_l2};

}  // namespace

namespace detail {
const KernelTable *avx2_table_impl() { return &kAvx2; }
}  // namespace detail

}  // namespace rcpose::kernels
