#pragma once

#include <array>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rcpose/geometry.h"
#include "rcpose/model_points.h"
#include "rcpose/update_rules.h"

namespace rcpose {

struct LossWeights {
    double alpha = 1e-2;       // weight of the focal loss in the total
    double beta = 1.0;         // weight of the Huber term inside the focal loss
    double huber_delta = 1.0;  // Huber transition, log-focal units

    void validate() const;
};

// Flat view of the update components, in the order
// v_x, v_y, v_z, v_r1 (3), v_r2 (3), v_f.
inline constexpr std::size_t kDeltaDims = 10;
using DeltaVector = std::array<double, kDeltaDims>;

DeltaVector to_vector(const DeltaTheta &delta);
DeltaTheta from_vector(const DeltaVector &v);
std::string_view delta_component_name(std::size_t i);

struct LossBreakdown {
    double total = 0.0;
    double pose = 0.0;   // disentangled point-matching loss
    double focal = 0.0;  // beta * huber + dr
    double huber = 0.0;
    double dr = 0.0;     // dr_pose + dr_focal

    // Parts of the two disentangled losses, exposed for inspection.
    double pose_xy = 0.0;
    double pose_z = 0.0;
    double pose_rotation = 0.0;
    double dr_pose = 0.0;   // 1/2 L_proj((R, t, f_gt), gt)
    double dr_focal = 0.0;  // 1/2 L_proj((R_gt, t_gt, f), gt)

    // Gradients with respect to the update components.
    DeltaVector grad_total{};
    DeltaVector grad_pose{};
    DeltaVector grad_focal{};
    DeltaVector grad_huber{};
    DeltaVector grad_dr{};
};

double huber(double r, double delta);
// Huber penalty on ln f - ln f_gt.
double huber_log_focal(double focal, double focal_gt, double delta);

// Sum over the points of the L1 pixel distance between the projections under
// `pred` and `gt`. Not normalized by the point count.
double reprojection_loss(const ParamState &pred, const ParamState &gt, const ModelPoints &points);

// 1/2 L_proj((R, t, f_gt), gt) + 1/2 L_proj((R_gt, t_gt, f), gt).
double disentangled_reprojection_loss(const ParamState &pred, const ParamState &gt, const ModelPoints &points);

// Mean over the points of the L1 distance between the two rigid transforms.
double point_matching_distance(const Rotation &r1, const Translation3 &t1, const Rotation &r2, const Translation3 &t2,
                               const ModelPoints &points);

// Three point-matching terms, each applying the update with one predicted
// group (x-y shift, depth ratio, rotation) and the oracle values for the rest.
double disentangled_pose_loss(const ParamState &state, const DeltaTheta &delta, const ParamState &gt,
                              const ModelPoints &points);

// pose + alpha * (beta * huber + dr), with analytic gradients.
LossBreakdown total_loss(const ParamState &state, const DeltaTheta &delta, const ParamState &gt,
                         const ModelPoints &points, const LossWeights &weights = {});

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradientCheckOptions {
    double step = 1e-6;
    // A component is flagged non-smooth when the forward/backward quotient
    // gaps at steps h, h/2 and h/4 stop scaling linearly with the step, by more
    // than this fraction of the gradient scale. A slope jump within h of x
    // shows up this way; plain curvature does not.
    double kink_tolerance = 2e-6;
    double abs_floor = 1e-8;
};

struct ComponentCheck {
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool smooth = true;
};

struct GradientCheckReport {
    std::vector<ComponentCheck> components;
    bool smooth = true;
    double max_rel_error = 0.0;  // over the smooth components only
};

using ScalarFunction = std::function<double(std::span<const double>)>;

GradientCheckReport gradient_check(const ScalarFunction &f, std::span<const double> x, std::span<const double> analytic,
                                   const GradientCheckOptions &options = {});

// Convenience wrapper for total_loss at (state, delta).
GradientCheckReport gradient_check_total_loss(const ParamState &state, const DeltaTheta &delta, const ParamState &gt,
                                              const ModelPoints &points, const LossWeights &weights,
                                              const GradientCheckOptions &options = {});

// Gradient check of total_loss at random states. Points are drawn until
// `points` smooth ones are found (at most max_attempts draws in total).
struct GradientCampaignOptions {
    std::size_t points = 100;
    std::size_t max_attempts = 1000;
    std::size_t model_points = kDefaultLossPointCount;
    std::uint64_t seed = 0;
    LossWeights weights;
    GradientCheckOptions check;
};

struct GradientCampaignPoint {
    std::size_t index = 0;  // draw index
    ParamState state;
    ParamState gt;
    DeltaTheta delta;
    GradientCheckReport report;
};

struct GradientCampaign {
    std::vector<GradientCampaignPoint> draws;  // smooth and non-smooth
    std::size_t smooth_count = 0;
    double max_rel_error = 0.0;  // over smooth points
};

GradientCampaign run_gradient_campaign(const GradientCampaignOptions &options);

}  // namespace rcpose
