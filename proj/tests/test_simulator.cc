#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "rcpose/simulator.h"
#include "test_util.h"

namespace rcpose {
namespace {

std::shared_ptr<const ModelPoints> object() {
    static const auto pts = std::make_shared<const ModelPoints>(ModelPoints::box_surface(Vec3(0.3, 0.2, 0.25), 500, 1));
    return pts;
}

ParamState target_for(std::uint64_t seed) { return sample_pose_uniform(UniformPoseRanges::pix3d(), 1, seed).front(); }

TrialResult run(const TrialConfig &c, const ParamState &target) {
    return run_refinement(c, target, projected_bbox(target, *object()), object());
}

void expect_same(const TrialResult &a, const TrialResult &b) {
    ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
        EXPECT_EQ(a.trajectory[k].e_R, b.trajectory[k].e_R);
        EXPECT_EQ(a.trajectory[k].e_t, b.trajectory[k].e_t);
        EXPECT_EQ(a.trajectory[k].e_Rt, b.trajectory[k].e_Rt);
        EXPECT_EQ(a.trajectory[k].e_f, b.trajectory[k].e_f);
        EXPECT_EQ(a.trajectory[k].e_P, b.trajectory[k].e_P);
        EXPECT_EQ(a.states[k].translation, b.states[k].translation);
        EXPECT_EQ(a.states[k].focal, b.states[k].focal);
    }
}

TEST(Simulator, OracleOneStep) {
    TrialConfig c;
    c.iterations = 1;
    for (std::uint64_t i = 0; i < 200; ++i) {
        c.seed = i;
        const TrialResult r = run(c, target_for(i));
        ASSERT_EQ(r.trajectory.size(), 2u);
        const MetricRecord &m = r.trajectory.back();
        EXPECT_LE(m.e_R, 1e-9);
        EXPECT_LE(m.e_t, 1e-9);
        EXPECT_LE(m.e_Rt, 1e-9);
        EXPECT_LE(m.e_f, 1e-9);
        EXPECT_LE(m.e_P, 1e-9);
        EXPECT_TRUE(r.converged);
    }
}

TEST(Simulator, TrajectoryLengthAndDeterminism) {
    TrialConfig c;
    c.iterations = 15;
    c.predictor.kind = PredictorKind::clamped;
    c.predictor.noise = NoiseSigmas{3, 3, 0.02, 5, 0.05};
    c.seed = 99;
    const ParamState t = target_for(5);
    const TrialResult a = run(c, t);
    const TrialResult b = run(c, t);
    EXPECT_EQ(a.trajectory.size(), 16u);
    expect_same(a, b);
    c.iterations = 0;
    EXPECT_THROW(run(c, t), DomainError);
}

TEST(Simulator, ClampedOracleConvergesFromRefinerNoise) {
    TrialConfig c;
    c.iterations = 55;
    c.init = InitSource::refiner_noise;
    c.predictor.kind = PredictorKind::clamped;
    const ClampBounds b;
    EXPECT_DOUBLE_EQ(b.pixel, 20.0);
    EXPECT_DOUBLE_EQ(b.log_depth, 0.1);
    EXPECT_DOUBLE_EQ(b.angle_deg, 5.0);
    EXPECT_DOUBLE_EQ(b.log_focal, 0.05);
    for (std::uint64_t i = 0; i < 300; ++i) {
        c.seed = i;
        const TrialResult r = run(c, target_for(1000 + i));
        EXPECT_TRUE(r.converged) << "trial " << i;
        EXPECT_LE(r.trajectory.back().e_Rt, 1e-6);
    }
}

TEST(Simulator, ClampedOracleMonotoneWithKnownFocal) {
    TrialConfig c;
    c.iterations = 55;
    c.init = InitSource::refiner_noise;
    c.init_noise.focal_rel = 0.0;
    c.predictor.kind = PredictorKind::clamped;
    for (std::uint64_t i = 0; i < 500; ++i) {
        c.seed = i;
        const TrialResult r = run(c, target_for(1000 + i));
        for (std::size_t k = 1; k < r.trajectory.size(); ++k) {
            ASSERT_LE(r.trajectory[k].e_Rt, r.trajectory[k - 1].e_Rt + 1e-12) << "trial " << i << " step " << k;
        }
    }
}

TEST(Simulator, ClampedOracleCanRaisePointErrorWhileFocalIsWrong) {
    // With a clamped focal step the exact rule puts the object center on the
    // right pixel at the wrong focal length, which moves x, y = c z / f away
    // from the target. This trial starts with a 31% focal error.
    TrialConfig c;
    c.iterations = 55;
    c.init = InitSource::refiner_noise;
    c.predictor.kind = PredictorKind::clamped;
    c.seed = 237;
    const TrialResult r = run(c, target_for(1237));
    EXPECT_GT(r.trajectory[0].e_f, 0.3);
    EXPECT_GT(r.trajectory[1].e_Rt, r.trajectory[0].e_Rt);
    EXPECT_TRUE(r.converged);
}

TEST(Simulator, PixelDisplacementEqualsPredictedShift) {
    TrialConfig c;
    c.iterations = 15;
    c.init = InitSource::refiner_noise;
    const Predictor noisy = make_noisy_oracle(NoiseSigmas{5, 5, 0.05, 10, 0.1});
    for (std::uint64_t i = 0; i < 50; ++i) {
        const ParamState t = target_for(i);
        std::vector<DeltaTheta> emitted;
        const Predictor record = [&](const ParamState &s, const ParamState &g, int k, Rng &rng) {
            emitted.push_back(noisy(s, g, k, rng));
            return emitted.back();
        };
        c.seed = i;
        const TrialResult r = run_refinement(c, t, projected_bbox(t, *object()), object(), record);
        for (std::size_t k = 1; k < r.states.size(); ++k) {
            const Vec2 shift = projected_center(r.states[k]) - projected_center(r.states[k - 1]);
            EXPECT_NEAR(shift.x(), emitted[k - 1].v_x, 1e-9);
            EXPECT_NEAR(shift.y(), emitted[k - 1].v_y, 1e-9);
        }
    }
}

TEST(Simulator, ExactRuleResidualBelowLegacyWhenFocalMoves) {
    // Pixel clamp far away so the exact rule lands on the target center each
    // step; focal, depth and rotation steps stay clamped.
    TrialConfig c;
    c.iterations = 15;
    c.init = InitSource::refiner_noise;
    c.predictor.kind = PredictorKind::clamped;
    c.predictor.clamp.pixel = 1e9;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const ParamState t = target_for(i);
        const BBox box = projected_bbox(t, *object());
        c.seed = i;
        c.rule = UpdateRule::exact;
        const TrialResult ex = run_refinement(c, t, box, object());
        c.rule = UpdateRule::legacy;
        const TrialResult lg = run_refinement(c, t, box, object());
        const Vec2 goal = projected_center(t);
        for (std::size_t k = 1; k < ex.states.size(); ++k) {
            const double v_f = std::log(lg.states[k].focal / lg.states[k - 1].focal);
            if (std::abs(v_f) <= 1e-12) continue;  // below round-off both residuals vanish
            const double re = (projected_center(ex.states[k]) - goal).norm();
            const double rl = (projected_center(lg.states[k]) - goal).norm();
            EXPECT_LT(re, rl) << "trial " << i << " step " << k;
        }
    }
}

TEST(Predictors, ZeroNoiseMatchesOracle) {
    const Predictor oracle = make_oracle();
    const Predictor noisy = make_noisy_oracle(NoiseSigmas{});
    Rng rng = make_rng(1), r1 = make_rng(2), r2 = make_rng(2);
    for (int i = 0; i < 100; ++i) {
        const ParamState s = testing::random_state(rng);
        const ParamState g = testing::perturbed(s, rng, 1.0);
        const DeltaTheta a = oracle(s, g, 1, r1);
        const DeltaTheta b = noisy(s, g, 1, r2);
        EXPECT_EQ(a.v_x, b.v_x);
        EXPECT_EQ(a.v_z, b.v_z);
        EXPECT_EQ(a.v_r1, b.v_r1);
        EXPECT_EQ(a.v_r2, b.v_r2);
        EXPECT_EQ(a.v_f, b.v_f);
    }
}

TEST(Predictors, FocalNoiseStd) {
    const Predictor noisy = make_noisy_oracle(NoiseSigmas{0, 0, 0, 0, 0.15});
    ParamState s, g;
    g.focal = 700;
    const double base = std::log(700.0 / 600.0);
    Rng rng = make_rng(3);
    double sum = 0, sq = 0;
    constexpr int kN = 100000;
    for (int i = 0; i < kN; ++i) {
        const double d = noisy(s, g, 1, rng).v_f - base;
        sum += d;
        sq += d * d;
    }
    const double mean = sum / kN;
    EXPECT_NEAR(std::sqrt(sq / kN - mean * mean), 0.15, 0.03 * 0.15);
}

TEST(Predictors, ClampRespectsBounds) {
    const ClampBounds b{7.0, 0.03, 2.0, 0.01};
    const Predictor p = make_clamped_oracle(b, NoiseSigmas{10, 10, 0.2, 30, 0.3});
    Rng rng = make_rng(4);
    for (int i = 0; i < 2000; ++i) {
        const ParamState s = testing::random_state(rng);
        const ParamState g = testing::perturbed(s, rng, 2.0);
        const DeltaTheta d = p(s, g, 1, rng);
        EXPECT_LE(std::hypot(d.v_x, d.v_y), 7.0 + 1e-12);
        EXPECT_LE(std::abs(std::log(d.v_z)), 0.03 + 1e-12);
        EXPECT_LE(Rotation::from_matrix(rotation_matrix_from_6d(d.v_r1, d.v_r2)).angle(),
                  2.0 * std::numbers::pi / 180.0 + 1e-9);
        EXPECT_LE(std::abs(d.v_f), 0.01);
    }
}

TEST(Simulator, InvalidDeltaAbortsWithIteration) {
    TrialConfig c;
    c.iterations = 10;
    const Predictor bad = [](const ParamState &s, const ParamState &g, int k, Rng &) {
        DeltaTheta d = oracle_delta(s, g);
        d.v_f *= 0.5;
        if (k == 4) d.v_z = -1.0;
        return d;
    };
    const ParamState t = target_for(7);
    try {
        run_refinement(c, t, projected_bbox(t, *object()), object(), bad);
        FAIL() << "expected an abort";
    } catch (const TrialAborted &e) {
        EXPECT_EQ(e.iteration(), 4);
    }
}

TEST(Simulator, FocalStaysPositiveUnderWildPredictions) {
    TrialConfig c;
    c.iterations = 30;
    c.predictor.kind = PredictorKind::noisy;
    c.predictor.noise = NoiseSigmas{50, 50, 0.5, 90, 5.0};
    for (std::uint64_t i = 0; i < 20; ++i) {
        c.seed = i;
        for (const ParamState &s : run(c, target_for(i)).states) EXPECT_GT(s.focal, 0.0);
    }
}

ExperimentConfig small_experiment() {
    ExperimentConfig e;
    e.points = object();
    e.trials = 12;
    e.seed = 5;
    e.trial.iterations = 8;
    e.trial.predictor.kind = PredictorKind::clamped;
    e.trial.predictor.noise = NoiseSigmas{3, 3, 0.02, 5, 0.1};
    e.keep_trajectories = true;
    return e;
}

TEST(Experiment, SingleTrialMatchesRunRefinement) {
    ExperimentConfig e = small_experiment();
    e.trials = 1;
    e.arms = {UpdateRule::exact};
    const CampaignReport rep = run_experiment(e);
    Rng split = make_rng(e.seed, 0);
    const std::uint64_t target_seed = split();
    TrialConfig tc = e.trial;
    tc.seed = split();
    const ParamState t = e.targets.sample(target_seed);
    expect_same(rep.arms[0].trials[0], run_refinement(tc, t, projected_bbox(t, *object()), object()));
    EXPECT_EQ(*rep.arms[0].final_summary.median_e_t, rep.arms[0].trials[0].trajectory.back().e_t);
}

TEST(Experiment, ArmsShareRandomness) {
    ExperimentConfig e = small_experiment();
    e.arms = {UpdateRule::exact, UpdateRule::exact};
    const CampaignReport same = run_experiment(e);
    for (int i = 0; i < e.trials; ++i) expect_same(same.arms[0].trials[i], same.arms[1].trials[i]);

    // Without focal motion the two rules agree up to rounding, so the arms must too.
    e.arms = {UpdateRule::exact, UpdateRule::legacy};
    e.trial.init = InitSource::refiner_noise;
    e.trial.init_noise.focal_rel = 0.0;
    e.trial.predictor.noise.f_log = 0.0;
    const CampaignReport rep = run_experiment(e);
    for (int i = 0; i < e.trials; ++i) {
        const auto &a = rep.arms[0].trials[i].states;
        const auto &b = rep.arms[1].trials[i].states;
        for (std::size_t k = 0; k < a.size(); ++k) {
            EXPECT_LE((a[k].translation - b[k].translation).norm(), 1e-12);
            EXPECT_EQ(a[k].focal, b[k].focal);
        }
    }
}

TEST(Experiment, WorkerCountDoesNotChangeResults) {
    ExperimentConfig e = small_experiment();
    const CampaignReport a = run_experiment(e);
    e.workers = 4;
    const CampaignReport b = run_experiment(e);
    for (std::size_t arm = 0; arm < a.arms.size(); ++arm) {
        for (int i = 0; i < e.trials; ++i) expect_same(a.arms[arm].trials[i], b.arms[arm].trials[i]);
        EXPECT_EQ(a.arms[arm].per_iteration.size(), 9u);
    }
}

}  // namespace
}  // namespace rcpose
