#pragma once

#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcpose/geometry.h"
#include "rcpose/model_points.h"

namespace rcpose {

struct EvalPair {
    ParamState pred;
    ParamState gt;
    std::shared_ptr<const ModelPoints> points;  // ground-truth instance
    BBox gt_bbox;
    double image_diagonal = 0.0;  // pixels
    std::optional<BBox> pred_bbox;

    void validate() const;
};

struct MetricRecord {
    double e_R = 0.0;   // radians
    double e_t = 0.0;
    double e_Rt = 0.0;
    double e_f = 0.0;
    double e_P = 0.0;   // +inf when the prediction puts a point behind the camera
    std::optional<double> iou;
};

double err_rot(const EvalPair &pair);
double err_trans(const EvalPair &pair);
double err_pose(const EvalPair &pair);
double err_focal(const EvalPair &pair);
double err_proj(const EvalPair &pair);
MetricRecord evaluate_pair(const EvalPair &pair);

struct AccuracyThresholds {
    double rotation = std::numbers::pi / 6.0;  // e_R <= this
    double projection = 0.1;                   // e_P <= this
    double iou = 0.5;                          // iou > this
};

struct MetricSummary {
    std::size_t count = 0;
    // Lower medians; empty when every value is infinite.
    std::optional<double> median_e_R;
    std::optional<double> median_e_t;
    std::optional<double> median_e_Rt;
    std::optional<double> median_e_f;
    std::optional<double> median_e_P;
    double acc_R = 0.0;
    double acc_P = 0.0;
    std::optional<double> acc_D;  // only when every record carries an iou
    AccuracyThresholds thresholds;
};

// Element at index ceil(n/2) - 1 of the sorted values.
std::optional<double> lower_median(std::vector<double> values);

MetricSummary aggregate(std::span<const MetricRecord> records, const AccuracyThresholds &thresholds = {});

struct HistogramSpec {
    std::string metric;          // e_R, e_t, e_Rt, e_f or e_P
    std::vector<double> edges;   // increasing; values past the last edge go to an overflow bin
};

struct HistogramRow {
    std::string metric;
    double lo = 0.0;
    double hi = 0.0;  // +inf for the overflow bin
    std::size_t count = 0;
};

std::vector<HistogramSpec> default_histogram_specs();
std::vector<HistogramRow> histograms(std::span<const MetricRecord> records, std::span<const HistogramSpec> specs);

// Value of a named error in a record; throws std::invalid_argument for an unknown name.
double metric_value(const MetricRecord &record, const std::string &metric);

}  // namespace rcpose
