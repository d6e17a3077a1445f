#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "rcpose/metrics.h"
#include "test_util.h"

namespace rcpose {
namespace {

constexpr double kPi = std::numbers::pi;

EvalPair make_pair(const ParamState &pred, const ParamState &gt, std::shared_ptr<const ModelPoints> points) {
    EvalPair p;
    p.pred = pred;
    p.gt = gt;
    p.points = std::move(points);
    p.gt_bbox = BBox::make(100, 100, 260, 220);  // diagonal 200
    p.image_diagonal = 800.0;
    return p;
}

std::shared_ptr<const ModelPoints> object(std::uint64_t seed) {
    return std::make_shared<const ModelPoints>(testing::small_object(seed));
}

TEST(Metrics, ZeroForPerfectPrediction) {
    Rng rng = make_rng(1);
    const ParamState gt = testing::random_state(rng);
    EvalPair p = make_pair(gt, gt, object(1));
    p.pred_bbox = p.gt_bbox;
    const MetricRecord m = evaluate_pair(p);
    EXPECT_EQ(m.e_R, 0.0);
    EXPECT_EQ(m.e_t, 0.0);
    EXPECT_EQ(m.e_Rt, 0.0);
    EXPECT_EQ(m.e_f, 0.0);
    EXPECT_EQ(m.e_P, 0.0);
    EXPECT_EQ(*m.iou, 1.0);
}

TEST(Metrics, RotationExamples) {
    ParamState gt;
    ParamState pred = gt;
    pred.rotation = Rotation::from_axis_angle(Vec3::UnitZ(), kPi / 6);
    EXPECT_NEAR(err_rot(make_pair(pred, gt, object(2))), kPi / 6, 1e-15);
}

TEST(Metrics, RotationMatchesMatrixLog) {
    Rng rng = make_rng(3);
    for (int i = 0; i < 100; ++i) {
        ParamState a, b;
        a.rotation = testing::random_rotation(rng);
        b.rotation = testing::random_rotation(rng);
        const Mat3 rel = b.rotation.matrix().transpose() * a.rotation.matrix();
        const Mat3 log = rel.log();
        EXPECT_NEAR(err_rot(make_pair(a, b, object(3))), log.norm() / std::sqrt(2.0), 1e-7);
    }
}

TEST(Metrics, TranslationExamples) {
    ParamState gt, pred;
    gt.translation = Translation3(0, 0, 2);
    pred.translation = Translation3(0, 0, 2.2);
    EXPECT_NEAR(err_trans(make_pair(pred, gt, object(4))), 0.1, 1e-15);
    pred.translation = Translation3(0, 0, 2.6);
    EXPECT_NEAR(err_trans(make_pair(pred, gt, object(4))), 0.3, 1e-15);
    gt.translation = Translation3::Zero();
    EXPECT_THROW(err_trans(make_pair(pred, gt, object(4))), DomainError);
}

TEST(Metrics, PoseExamples) {
    ParamState gt, pred;
    gt.translation = Translation3(0, 0, 2);
    pred.translation = Translation3(0, 0, 2.2);
    EvalPair p = make_pair(pred, gt, object(5));
    p.image_diagonal = 400.0;  // d_bbox / d_img = 0.5
    EXPECT_NEAR(err_pose(p), 0.05, 1e-15);
    p.gt_bbox = BBox::make(100, 100, 420, 340);  // diagonal 400
    EXPECT_NEAR(err_pose(p), 0.1, 1e-15);
}

TEST(Metrics, PoseReducesToScaledTranslationError) {
    Rng rng = make_rng(6);
    for (int i = 0; i < 100; ++i) {
        const ParamState gt = testing::random_state(rng);
        ParamState pred = testing::perturbed(gt, rng, 1.0);
        pred.rotation = gt.rotation;
        const EvalPair p = make_pair(pred, gt, std::make_shared<const ModelPoints>(testing::small_object(i, 1 + i % 37)));
        const double expected = p.gt_bbox.diagonal() / p.image_diagonal * err_trans(p);
        EXPECT_NEAR(err_pose(p), expected, 1e-12 * std::max(1.0, expected));
    }
}

TEST(Metrics, FocalExamples) {
    ParamState gt, pred;
    gt.focal = 600;
    pred.focal = 660;
    EXPECT_NEAR(err_focal(make_pair(pred, gt, object(7))), 0.1, 1e-15);
    pred.focal = 600;
    EXPECT_EQ(err_focal(make_pair(pred, gt, object(7))), 0.0);
}

TEST(Metrics, ProjectionExamples) {
    ParamState gt, pred;
    gt.focal = 660;
    pred.focal = 600;
    EvalPair p = make_pair(pred, gt, std::make_shared<const ModelPoints>(std::vector<Vec3>{Vec3::Zero()}));
    EXPECT_EQ(err_proj(p), 0.0);
    p.points = std::make_shared<const ModelPoints>(std::vector<Vec3>{Vec3(0.1, 0, 0)});
    p.gt_bbox = BBox::make(0, 0, 60, 80);  // diagonal 100
    EXPECT_NEAR(err_proj(p), 0.06, 1e-15);
}

TEST(Metrics, ProjectionBehindCameraIsInfinite) {
    ParamState gt, pred;
    pred.translation = Translation3(0, 0, -1);
    const EvalPair p = make_pair(pred, gt, object(8));
    EXPECT_TRUE(std::isinf(err_proj(p)));
    const EvalPair q = make_pair(gt, pred, object(8));
    EXPECT_THROW(err_proj(q), DomainError);
}

TEST(Metrics, ProjectionInvariantToCommonRescale) {
    Rng rng = make_rng(9);
    const ParamState gt = testing::random_state(rng);
    const ParamState pred = testing::perturbed(gt, rng, 0.3);
    const EvalPair p = make_pair(pred, gt, object(9));
    EvalPair q = p;
    const double s = 2.5;
    q.pred.focal *= s;
    q.gt.focal *= s;
    q.gt_bbox = BBox::make(p.gt_bbox.x1 * s, p.gt_bbox.y1 * s, p.gt_bbox.x2 * s, p.gt_bbox.y2 * s);
    EXPECT_NEAR(err_proj(q), err_proj(p), 1e-13 * err_proj(p));
}

TEST(Metrics, MissingPointsIsAnError) {
    ParamState s;
    EvalPair p = make_pair(s, s, nullptr);
    EXPECT_THROW(evaluate_pair(p), DomainError);
}

MetricRecord record(double v) {
    MetricRecord r;
    r.e_R = r.e_t = r.e_Rt = r.e_f = r.e_P = v;
    r.iou = v;
    return r;
}

TEST(Aggregate, SingleRecord) {
    const std::vector<MetricRecord> one{record(0.3)};
    const MetricSummary s = aggregate(one);
    EXPECT_EQ(*s.median_e_R, 0.3);
    EXPECT_EQ(*s.median_e_P, 0.3);
    EXPECT_EQ(s.acc_R, 0.0 + (0.3 <= kPi / 6));
    EXPECT_EQ(s.acc_P, 0.0);
    EXPECT_EQ(*s.acc_D, 0.0);
    EXPECT_THROW(aggregate(std::vector<MetricRecord>{}), std::invalid_argument);
}

TEST(Aggregate, LowerMedianOf1001) {
    std::vector<MetricRecord> r;
    for (int i = 1000; i >= 0; --i) r.push_back(record(i * 1e-3));
    EXPECT_DOUBLE_EQ(*aggregate(r).median_e_t, 0.5);  // the 501st value
    r.pop_back();                                     // values 0.001 .. 1.000
    EXPECT_DOUBLE_EQ(*aggregate(r).median_e_t, 0.5);  // lower of 0.500 and 0.501
}

TEST(Aggregate, Thresholds) {
    const AccuracyThresholds t;
    EXPECT_DOUBLE_EQ(t.rotation, kPi / 6);
    EXPECT_DOUBLE_EQ(t.projection, 0.1);
    EXPECT_DOUBLE_EQ(t.iou, 0.5);
    std::vector<MetricRecord> r{record(0.1), record(0.5), record(0.05), record(0.6)};
    r[0].e_R = kPi / 6;  // inclusive
    const MetricSummary s = aggregate(r);
    EXPECT_DOUBLE_EQ(s.acc_R, 0.75);  // 0.6 is above pi / 6
    EXPECT_DOUBLE_EQ(s.acc_P, 0.5);   // 0.1 and 0.05
    EXPECT_DOUBLE_EQ(*s.acc_D, 0.25);  // only 0.6 is strictly above 0.5
}

TEST(Aggregate, InfiniteProjection) {
    std::vector<MetricRecord> r{record(0.1), record(0.2), record(0.3)};
    r[0].e_P = r[1].e_P = std::numeric_limits<double>::infinity();
    EXPECT_TRUE(std::isinf(*aggregate(r).median_e_P));
    r[2].e_P = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(aggregate(r).median_e_P.has_value());
    EXPECT_DOUBLE_EQ(aggregate(r).acc_P, 0.0);
}

TEST(Aggregate, PermutationInvariant) {
    Rng rng = make_rng(10);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<MetricRecord> r;
    for (int i = 0; i < 200; ++i) {
        MetricRecord m;
        m.e_R = u(rng), m.e_t = u(rng), m.e_Rt = u(rng), m.e_f = u(rng), m.e_P = u(rng), m.iou = u(rng);
        r.push_back(m);
    }
    const MetricSummary a = aggregate(r);
    std::shuffle(r.begin(), r.end(), rng);
    const MetricSummary b = aggregate(r);
    EXPECT_EQ(*a.median_e_R, *b.median_e_R);
    EXPECT_EQ(*a.median_e_f, *b.median_e_f);
    EXPECT_EQ(a.acc_P, b.acc_P);
    EXPECT_EQ(*a.acc_D, *b.acc_D);
}

TEST(Histograms, BinsAndOverflow) {
    const std::vector<MetricRecord> r{record(0.0), record(0.049), record(0.05), record(0.99), record(1.0), record(7.0)};
    const std::vector<HistogramSpec> spec{{"e_t", {0.0, 0.05, 0.5, 1.0}}};
    const std::vector<HistogramRow> rows = histograms(r, spec);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].count, 2u);
    EXPECT_EQ(rows[1].count, 1u);
    EXPECT_EQ(rows[2].count, 1u);
    EXPECT_EQ(rows[3].count, 2u);
    EXPECT_TRUE(std::isinf(rows[3].hi));
    EXPECT_EQ(default_histogram_specs().size(), 5u);
}

}  // namespace
}  // namespace rcpose
