#include "rcpose/simulator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace rcpose {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double draw(Rng &rng, double sigma) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

Vec3 random_axis(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        const Vec3 v(n(rng), n(rng), n(rng));
        if (v.norm() > 1e-12) return v.normalized();
    }
}

void set_rotation(DeltaTheta &d, const Mat3 &r) {
    d.v_r1 = r.col(0);
    d.v_r2 = r.col(1);
}

DeltaTheta add_noise(DeltaTheta d, const NoiseSigmas &s, Rng &rng) {
    // Fixed draw order keeps streams aligned across predictor kinds.
    const double nx = draw(rng, s.x_px);
    const double ny = draw(rng, s.y_px);
    const double nz = draw(rng, s.z_log);
    const Vec3 axis = random_axis(rng);
    const double nr = draw(rng, s.rotation_deg * kDegToRad);
    const double nf = draw(rng, s.f_log);
    d.v_x += nx;
    d.v_y += ny;
    d.v_z *= std::exp(nz);
    if (nr != 0.0) {
        const Mat3 r = Rotation::from_axis_angle(axis, nr).matrix() * rotation_matrix_from_6d(d.v_r1, d.v_r2);
        set_rotation(d, r);
    }
    d.v_f += nf;
    return d;
}

DeltaTheta clamp(DeltaTheta d, const ClampBounds &b) {
    const double pix = std::hypot(d.v_x, d.v_y);
    if (pix > b.pixel) {
        d.v_x *= b.pixel / pix;
        d.v_y *= b.pixel / pix;
    }
    d.v_z = std::exp(std::clamp(std::log(d.v_z), -b.log_depth, b.log_depth));
    const Eigen::AngleAxisd aa(rotation_matrix_from_6d(d.v_r1, d.v_r2));
    const double max_angle = b.angle_deg * kDegToRad;
    if (aa.angle() > max_angle) {
        set_rotation(d, Eigen::AngleAxisd(max_angle, aa.axis()).toRotationMatrix());
    }
    d.v_f = std::clamp(d.v_f, -b.log_focal, b.log_focal);
    return d;
}

ParamState initial_state(const TrialConfig &config, const ParamState &target, const BBox &bbox, Rng &rng) {
    switch (config.init) {
        case InitSource::bbox:
            return init_state(bbox, CameraIntrinsics{kInitialFocal, 0.0, 0.0});
        case InitSource::refiner_noise:
            return sample_refiner_noise(target, rng, config.init_noise);
    }
    throw std::logic_error("unknown init source");
}

MetricRecord measure(const TrialConfig &config, const ParamState &state, const ParamState &target, const BBox &bbox,
                     const std::shared_ptr<const ModelPoints> &points) {
    EvalPair pair;
    pair.pred = state;
    pair.gt = target;
    pair.points = points;
    pair.gt_bbox = bbox;
    pair.image_diagonal = config.image_diagonal;
    try {
        pair.pred_bbox = projected_bbox(state, *points);
    } catch (const DomainError &) {
        pair.pred_bbox.reset();
    }
    MetricRecord m = evaluate_pair(pair);
    if (!m.iou) m.iou = 0.0;
    return m;
}

void check_non_negative(std::initializer_list<double> values, const char *what) {
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DomainError(std::string(what) + ": values must be finite and non-negative");
        }
    }
}

}  // namespace

void NoiseSigmas::validate() const { check_non_negative({x_px, y_px, z_log, rotation_deg, f_log}, "noise sigmas"); }

void ClampBounds::validate() const {
    for (double v : {pixel, log_depth, angle_deg, log_focal}) {
        if (!(v > 0.0)) throw DomainError("clamp bounds must be positive");
    }
}

void TrialConfig::validate() const {
    if (iterations < 1) throw DomainError("trial: iteration count K must be at least 1");
    predictor.noise.validate();
    if (predictor.kind == PredictorKind::clamped) predictor.clamp.validate();
    if (!(image_diagonal > 0.0)) throw DomainError("trial: image diagonal must be positive");
    check_non_negative({tolerance.rotation, tolerance.translation, tolerance.focal}, "trial tolerances");
}

TrialAborted::TrialAborted(int iteration, const std::string &what)
    : std::runtime_error("trial aborted at iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

Predictor make_oracle() {
    return [](const ParamState &current, const ParamState &target, int, Rng &) { return oracle_delta(current, target); };
}

Predictor make_noisy_oracle(const NoiseSigmas &sigmas) {
    sigmas.validate();
    return [sigmas](const ParamState &current, const ParamState &target, int, Rng &rng) {
        return add_noise(oracle_delta(current, target), sigmas, rng);
    };
}

Predictor make_clamped_oracle(const ClampBounds &bounds, const NoiseSigmas &sigmas) {
    bounds.validate();
    sigmas.validate();
    return [bounds, sigmas](const ParamState &current, const ParamState &target, int, Rng &rng) {
        return clamp(add_noise(oracle_delta(current, target), sigmas, rng), bounds);
    };
}

Predictor make_predictor(const PredictorConfig &config) {
    switch (config.kind) {
        case PredictorKind::oracle:
            return make_oracle();
        case PredictorKind::noisy:
            return make_noisy_oracle(config.noise);
        case PredictorKind::clamped:
            return make_clamped_oracle(config.clamp, config.noise);
    }
    throw std::logic_error("unknown predictor kind");
}

BBox projected_bbox(const ParamState &state, const ModelPoints &points) {
    const CameraIntrinsics k{state.focal, 0.0, 0.0};
    double x1 = std::numeric_limits<double>::infinity(), y1 = x1;
    double x2 = -x1, y2 = -x1;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec2 p = project_point(k, state.rotation, state.translation, points.point(i));
        x1 = std::min(x1, p.x());
        y1 = std::min(y1, p.y());
        x2 = std::max(x2, p.x());
        y2 = std::max(y2, p.y());
    }
    return BBox::make(x1, y1, x2, y2);
}

Vec2 projected_center(const ParamState &state) {
    return state.focal * state.translation.head<2>() / state.translation.z();
}

TrialResult run_refinement(const TrialConfig &config, const ParamState &target, const BBox &bbox,
                           const std::shared_ptr<const ModelPoints> &points) {
    config.validate();
    return run_refinement(config, target, bbox, points, make_predictor(config.predictor));
}

TrialResult run_refinement(const TrialConfig &config, const ParamState &target, const BBox &bbox,
                           const std::shared_ptr<const ModelPoints> &points, const Predictor &predictor) {
    config.validate();
    target.validate();
    if (!points || points->empty()) throw DomainError("run_refinement: no model points");
    Rng rng = make_rng(config.seed);

    TrialResult result;
    ParamState state = initial_state(config, target, bbox, rng);
    result.states.push_back(state);
    result.trajectory.push_back(measure(config, state, target, bbox, points));
    for (int k = 1; k <= config.iterations; ++k) {
        try {
            const DeltaTheta delta = predictor(state, target, k, rng);
            delta.validate();
            state = apply_update(state, delta, config.rule);
        } catch (const DomainError &e) {
            throw TrialAborted(k, e.what());
        }
        result.states.push_back(state);
        result.trajectory.push_back(measure(config, state, target, bbox, points));
    }
    result.final_state = state;
    const MetricRecord &last = result.trajectory.back();
    result.converged = last.e_R <= config.tolerance.rotation && last.e_t <= config.tolerance.translation &&
                       last.e_f <= config.tolerance.focal;
    return result;
}

ParamState TargetDistribution::sample(std::uint64_t seed) const {
    switch (source) {
        case TargetSource::uniform:
            return sample_pose_uniform(uniform, 1, seed).front();
        case TargetSource::parametric:
            if (!parametric) throw DomainError("targets: parametric model missing");
            return sample_pose_parametric(*parametric, 1, seed).front();
        case TargetSource::nonparametric:
            return sample_pose_nonparametric(records, deltas, 1, seed).front();
    }
    throw std::logic_error("unknown target source");
}

CampaignReport run_experiment(const ExperimentConfig &config) {
    if (config.trials < 1) throw DomainError("experiment: need at least one trial");
    if (config.arms.empty()) throw DomainError("experiment: no update-rule arms");
    if (!config.points || config.points->empty()) throw DomainError("experiment: no model points");
    config.trial.validate();

    const std::size_t n = static_cast<std::size_t>(config.trials);
    const std::size_t arms = config.arms.size();
    std::vector<ParamState> targets(n);
    std::vector<std::vector<TrialResult>> results(arms, std::vector<TrialResult>(n));
    std::vector<std::exception_ptr> errors(n);

    const auto run_trial = [&](std::size_t i) {
        Rng split = make_rng(config.seed, i);
        const std::uint64_t target_seed = split();
        TrialConfig tc = config.trial;
        tc.seed = split();
        targets[i] = config.targets.sample(target_seed);
        const BBox bbox = projected_bbox(targets[i], *config.points);
        for (std::size_t a = 0; a < arms; ++a) {
            tc.rule = config.arms[a];
            results[a][i] = run_refinement(tc, targets[i], bbox, config.points);
        }
    };

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                run_trial(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(config.workers, config.trials));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread &t : pool) t.join();
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception &e) {
                throw std::runtime_error("trial " + std::to_string(i) + ": " + e.what());
            }
        }
    }

    CampaignReport report;
    report.targets = targets;
    const std::size_t steps = static_cast<std::size_t>(config.trial.iterations) + 1;
    for (std::size_t a = 0; a < arms; ++a) {
        ArmReport arm;
        arm.rule = config.arms[a];
        std::vector<MetricRecord> finals;
        for (const TrialResult &r : results[a]) {
            finals.push_back(r.trajectory.back());
            arm.converged += r.converged;
        }
        arm.final_summary = aggregate(finals);
        for (std::size_t k = 0; k < steps; ++k) {
            std::vector<MetricRecord> at;
            at.reserve(n);
            for (const TrialResult &r : results[a]) at.push_back(r.trajectory[k]);
            arm.per_iteration.push_back(aggregate(at));
        }
        if (config.keep_trajectories) arm.trials = std::move(results[a]);
        report.arms.push_back(std::move(arm));
    }
    return report;
}

const char *to_string(UpdateRule rule) { return rule == UpdateRule::exact ? "exact" : "legacy"; }

const char *to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::oracle:
            return "oracle";
        case PredictorKind::noisy:
            return "noisy";
        case PredictorKind::clamped:
            return "clamped";
    }
    return "?";
}

const char *to_string(InitSource source) { return source == InitSource::bbox ? "bbox" : "refiner_noise"; }

const char *to_string(TargetSource source) {
    switch (source) {
        case TargetSource::uniform:
            return "uniform";
        case TargetSource::parametric:
            return "parametric";
        case TargetSource::nonparametric:
            return "nonparametric";
    }
    return "?";
}

}  // namespace rcpose
