#include "rcpose/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rcpose/kernels/kernels.h"

namespace rcpose {

namespace {

kernels::RigidPose rigid(const ParamState &s) {
    kernels::RigidPose p;
    const Mat3 r = s.rotation.matrix();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) p.r[3 * i + j] = r(i, j);
        p.t[i] = s.translation[i];
    }
    return p;
}

double gt_translation_norm(const EvalPair &pair) {
    const double n = pair.gt.translation.norm();
    if (!(n > 0.0)) {
        throw DomainError("metrics: ground-truth translation is zero");
    }
    return n;
}

const ModelPoints &points_of(const EvalPair &pair) {
    if (!pair.points || pair.points->empty()) {
        throw DomainError("metrics: pair has no model points");
    }
    return *pair.points;
}

}  // namespace

void EvalPair::validate() const {
    if (!(pred.focal > 0.0) || !(gt.focal > 0.0)) {
        throw DomainError("metrics: focal lengths must be positive");
    }
    gt_bbox.validate();
    if (pred_bbox) pred_bbox->validate();
    if (!(image_diagonal > 0.0) || !std::isfinite(image_diagonal)) {
        throw DomainError("metrics: image diagonal must be positive");
    }
    points_of(*this);
}

double err_rot(const EvalPair &pair) { return geodesic_distance(pair.pred.rotation, pair.gt.rotation); }

double err_trans(const EvalPair &pair) {
    return (pair.pred.translation - pair.gt.translation).norm() / gt_translation_norm(pair);
}

double err_pose(const EvalPair &pair) {
    const ModelPoints &pts = points_of(pair);
    const double tn = gt_translation_norm(pair);
    if (!(pair.image_diagonal > 0.0)) {
        throw DomainError("metrics: image diagonal must be positive");
    }
    const double sum = kernels::active().rigid_l2(pts.view(), rigid(pair.pred), rigid(pair.gt));
    const double avg = sum / static_cast<double>(pts.size());
    return pair.gt_bbox.diagonal() / pair.image_diagonal * avg / tn;
}

double err_focal(const EvalPair &pair) {
    if (!(pair.gt.focal > 0.0)) {
        throw DomainError("metrics: ground-truth focal length must be positive");
    }
    return std::abs(pair.gt.focal - pair.pred.focal) / pair.gt.focal;
}

double err_proj(const EvalPair &pair) {
    const ModelPoints &pts = points_of(pair);
    const double d_bbox = pair.gt_bbox.diagonal();
    if (!(d_bbox > 0.0)) {
        throw DomainError("metrics: ground-truth bbox diagonal must be positive");
    }
    const kernels::RigidPose gt = rigid(pair.gt);
    const auto r = kernels::active().projection_l2(pts.view(), rigid(pair.pred), pair.pred.focal, gt, pair.gt.focal);
    if (!(r.min_depth > 0.0)) {
        const Mat3 rg = pair.gt.rotation.matrix();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double z = rg.row(2).dot(pts.point(i)) + pair.gt.translation.z();
            if (!(z > 0.0)) {
                std::ostringstream os;
                os << "metrics: model point " << i << " has non-positive ground-truth depth " << z;
                throw DomainError(os.str());
            }
        }
        return std::numeric_limits<double>::infinity();
    }
    return r.value / static_cast<double>(pts.size()) / d_bbox;
}

MetricRecord evaluate_pair(const EvalPair &pair) {
    pair.validate();
    MetricRecord m;
    m.e_R = err_rot(pair);
    m.e_t = err_trans(pair);
    m.e_Rt = err_pose(pair);
    m.e_f = err_focal(pair);
    m.e_P = err_proj(pair);
    if (pair.pred_bbox) m.iou = bbox_iou(*pair.pred_bbox, pair.gt_bbox);
    return m;
}

std::optional<double> lower_median(std::vector<double> values) {
    if (values.empty()) return std::nullopt;
    if (std::all_of(values.begin(), values.end(), [](double v) { return std::isinf(v); })) return std::nullopt;
    const std::size_t k = (values.size() + 1) / 2 - 1;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

double metric_value(const MetricRecord &record, const std::string &metric) {
    if (metric == "e_R") return record.e_R;
    if (metric == "e_t") return record.e_t;
    if (metric == "e_Rt") return record.e_Rt;
    if (metric == "e_f") return record.e_f;
    if (metric == "e_P") return record.e_P;
    throw std::invalid_argument("unknown metric '" + metric + "'");
}

MetricSummary aggregate(std::span<const MetricRecord> records, const AccuracyThresholds &thresholds) {
    if (records.empty()) {
        throw std::invalid_argument("aggregate: no records");
    }
    const auto column = [&](const char *name) {
        std::vector<double> v;
        v.reserve(records.size());
        for (const MetricRecord &r : records) v.push_back(metric_value(r, name));
        return v;
    };
    MetricSummary s;
    s.count = records.size();
    s.thresholds = thresholds;
    s.median_e_R = lower_median(column("e_R"));
    s.median_e_t = lower_median(column("e_t"));
    s.median_e_Rt = lower_median(column("e_Rt"));
    s.median_e_f = lower_median(column("e_f"));
    s.median_e_P = lower_median(column("e_P"));
    const double n = static_cast<double>(records.size());
    std::size_t acc_r = 0, acc_p = 0, acc_d = 0, with_iou = 0;
    for (const MetricRecord &r : records) {
        acc_r += r.e_R <= thresholds.rotation;
        acc_p += r.e_P <= thresholds.projection;
        if (r.iou) {
            ++with_iou;
            acc_d += *r.iou > thresholds.iou;
        }
    }
    s.acc_R = static_cast<double>(acc_r) / n;
    s.acc_P = static_cast<double>(acc_p) / n;
    if (with_iou == records.size()) s.acc_D = static_cast<double>(acc_d) / n;
    return s;
}

std::vector<HistogramSpec> default_histogram_specs() {
    const auto linear = [](double hi, int bins) {
        std::vector<double> e(static_cast<std::size_t>(bins) + 1);
        for (int i = 0; i <= bins; ++i) e[static_cast<std::size_t>(i)] = hi * i / bins;
        return e;
    };
    return {{"e_R", linear(std::numbers::pi, 18)},
            {"e_t", linear(1.0, 20)},
            {"e_Rt", linear(1.0, 20)},
            {"e_f", linear(1.0, 20)},
            {"e_P", linear(1.0, 20)}};
}

std::vector<HistogramRow> histograms(std::span<const MetricRecord> records, std::span<const HistogramSpec> specs) {
    std::vector<HistogramRow> rows;
    for (const HistogramSpec &spec : specs) {
        if (spec.edges.size() < 2 || !std::is_sorted(spec.edges.begin(), spec.edges.end())) {
            throw std::invalid_argument("histogram '" + spec.metric + "': need at least two increasing edges");
        }
        const std::size_t first = rows.size();
        for (std::size_t i = 0; i + 1 < spec.edges.size(); ++i) {
            rows.push_back({spec.metric, spec.edges[i], spec.edges[i + 1], 0});
        }
        rows.push_back({spec.metric, spec.edges.back(), std::numeric_limits<double>::infinity(), 0});
        for (const MetricRecord &r : records) {
            const double v = metric_value(r, spec.metric);
            if (v < spec.edges.front()) continue;
            // Bins are [lo, hi); the overflow bin takes everything from the last edge on.
            const auto it = std::upper_bound(spec.edges.begin(), spec.edges.end(), v);
            const std::size_t bin = static_cast<std::size_t>(it - spec.edges.begin()) - 1;
            ++rows[first + bin].count;
        }
    }
    return rows;
}

}  // namespace rcpose
