#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcpose/metrics.h"
#include "rcpose/model_points.h"
#include "rcpose/random.h"
#include "rcpose/sampling.h"
#include "rcpose/update_rules.h"

namespace rcpose {

// Stand-in for the refiner network: maps (current, target, iteration) to an update.
using Predictor = std::function<DeltaTheta(const ParamState &current, const ParamState &target, int iteration, Rng &rng)>;

struct NoiseSigmas {
    double x_px = 0.0;
    double y_px = 0.0;
    double z_log = 0.0;
    double rotation_deg = 0.0;
    double f_log = 0.0;

    void validate() const;
};

// Per-step limits, each in the natural space of its component.
struct ClampBounds {
    double pixel = 20.0;      // norm of (v_x, v_y)
    double log_depth = 0.1;   // |ln v_z|
    double angle_deg = 5.0;   // rotation angle of the 6D update
    double log_focal = 0.05;  // |v_f|

    void validate() const;
};

enum class PredictorKind { oracle, noisy, clamped };

struct PredictorConfig {
    PredictorKind kind = PredictorKind::oracle;
    NoiseSigmas noise;  // noisy and clamped
    ClampBounds clamp;  // clamped only; noise is added before clamping
};

Predictor make_oracle();
Predictor make_noisy_oracle(const NoiseSigmas &sigmas);
Predictor make_clamped_oracle(const ClampBounds &bounds, const NoiseSigmas &sigmas = {});
Predictor make_predictor(const PredictorConfig &config);

// Where the first state comes from.
enum class InitSource {
    bbox,           // identity rotation at 1 m behind the bbox center, f = 600
    refiner_noise,  // target perturbed by the refiner training noise
};

struct ConvergenceTolerance {
    double rotation = 1e-6;
    double translation = 1e-6;
    double focal = 1e-6;
};

struct TrialConfig {
    int iterations = 15;
    UpdateRule rule = UpdateRule::exact;
    PredictorConfig predictor;
    InitSource init = InitSource::bbox;
    RefinerNoise init_noise;
    ConvergenceTolerance tolerance;
    double image_diagonal = 800.0;  // 640 x 480
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrialResult {
    std::vector<MetricRecord> trajectory;  // iterations + 1 entries
    std::vector<ParamState> states;        // same length
    ParamState final_state;
    bool converged = false;
};

class TrialAborted : public std::runtime_error {
  public:
    TrialAborted(int iteration, const std::string &what);
    int iteration() const { return iteration_; }

  private:
    int iteration_;
};

// Bounding box of the projected points, principal point at the origin.
BBox projected_bbox(const ParamState &state, const ModelPoints &points);

// Projected object center f (x, y) / z.
Vec2 projected_center(const ParamState &state);

TrialResult run_refinement(const TrialConfig &config, const ParamState &target, const BBox &bbox,
                           const std::shared_ptr<const ModelPoints> &points);
// Same loop with a caller-supplied predictor; config.predictor is ignored.
TrialResult run_refinement(const TrialConfig &config, const ParamState &target, const BBox &bbox,
                           const std::shared_ptr<const ModelPoints> &points, const Predictor &predictor);

enum class TargetSource { uniform, parametric, nonparametric };

struct TargetDistribution {
    TargetSource source = TargetSource::uniform;
    UniformPoseRanges uniform;
    std::optional<ParametricPoseModel> parametric;
    std::vector<AnnotationRecord> records;  // nonparametric
    NonparamDeltas deltas;

    ParamState sample(std::uint64_t seed) const;
};

struct ExperimentConfig {
    TrialConfig trial;
    std::vector<UpdateRule> arms{UpdateRule::exact, UpdateRule::legacy};
    TargetDistribution targets;
    std::shared_ptr<const ModelPoints> points;
    int trials = 100;
    std::uint64_t seed = 0;
    int workers = 1;
    bool keep_trajectories = false;
};

struct ArmReport {
    UpdateRule rule = UpdateRule::exact;
    MetricSummary final_summary;
    std::vector<MetricSummary> per_iteration;  // iterations + 1 entries
    std::size_t converged = 0;
    std::vector<TrialResult> trials;  // only with keep_trajectories
};

struct CampaignReport {
    std::vector<ArmReport> arms;
    std::vector<ParamState> targets;
};

// Trial i uses make_rng(seed, i) for its target and shares one predictor
// stream across arms, so arms differ only in the update rule.
CampaignReport run_experiment(const ExperimentConfig &config);

const char *to_string(UpdateRule rule);
const char *to_string(PredictorKind kind);
const char *to_string(InitSource source);
const char *to_string(TargetSource source);

}  // namespace rcpose
