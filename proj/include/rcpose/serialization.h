#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcpose/bingham.h"
#include "rcpose/metrics.h"
#include "rcpose/sampling.h"
#include "rcpose/simulator.h"
#include "rcpose/update_rules.h"

namespace rcpose {

using Json = nlohmann::ordered_json;

// Raised for malformed input files and configs. The message carries the
// location: a line number for JSON-lines files, a field path for documents.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

Json to_json(const ParamState &s);           // quat_wxyz, t_m, focal_px
Json to_json(const DeltaTheta &d);
Json to_json(const AnnotationRecord &r);     // quat_wxyz, t_m, f_px, img_wh, bbox
Json to_json(const BinghamParams &p);
Json to_json(const Gaussian2DParams &p);
Json to_json(const NonparamDeltas &d);
Json to_json(const MetricRecord &m);
Json to_json(const MetricSummary &s);
Json to_json(const UniformPoseRanges &r);

ParamState param_state_from_json(const Json &j, const std::string &path);
AnnotationRecord annotation_from_json(const Json &j, const std::string &path);
BinghamParams bingham_from_json(const Json &j, const std::string &path);
Gaussian2DParams gaussian_from_json(const Json &j, const std::string &path);
NonparamDeltas deltas_from_json(const Json &j, const std::string &path);
UniformPoseRanges ranges_from_json(const Json &j, const std::string &path);

// JSON-lines annotations; blank lines are skipped, errors name the line.
std::vector<AnnotationRecord> read_annotations(std::istream &in);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path &path);

// A fitted (or declared) pose distribution, stored as one JSON document.
struct PoseDistribution {
    enum class Kind { parametric, nonparametric, uniform } kind = Kind::uniform;
    ParametricPoseModel parametric;
    NonparamDeltas deltas;
    std::vector<AnnotationRecord> records;  // nonparametric only
    UniformPoseRanges uniform;

    std::vector<ParamState> sample(std::size_t n, std::uint64_t seed) const;
    TargetDistribution as_targets() const;
};

Json to_json(const PoseDistribution &d);
PoseDistribution distribution_from_json(const Json &j);

// Prediction / ground-truth pairs, one per line:
//   {"pred": state, "gt": state, "gt_bbox": [x1, y1, x2, y2], "img_wh": [w, h],
//    "pred_bbox": [...] (optional), "model": "points.obj" | "model_points": [[x, y, z], ...]}
// Model paths are resolved relative to `base_dir` and loaded once.
std::vector<EvalPair> read_eval_pairs(std::istream &in, const std::filesystem::path &base_dir);
std::vector<EvalPair> read_eval_pairs(const std::filesystem::path &path);

// Reads a whole file; throws FormatError when it cannot be opened.
std::string read_text_file(const std::filesystem::path &path);

// Shortest round-trip decimal representation, "inf"/"-inf"/"nan" otherwise.
std::string format_double(double v);

void write_histograms_csv(std::ostream &out, const std::vector<HistogramSpec> &specs,
                          const std::vector<HistogramRow> &rows);

}  // namespace rcpose
