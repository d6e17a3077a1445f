#include "rcpose/serialization.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace rcpose {

namespace {

[[noreturn]] void fail(const std::string &path, const std::string &what) { throw FormatError(path + ": " + what); }

const Json &field(const Json &j, const char *key, const std::string &path) {
    if (!j.is_object()) fail(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing field");
    return *it;
}

double number(const Json &j, const std::string &path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

template <std::size_t N>
std::array<double, N> numbers(const Json &j, const std::string &path) {
    if (!j.is_array() || j.size() != N) fail(path, "expected an array of " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], path + "[" + std::to_string(i) + "]");
    return out;
}

double number_field(const Json &j, const char *key, const std::string &path) {
    return number(field(j, key, path), path + "." + key);
}

template <std::size_t N>
std::array<double, N> numbers_field(const Json &j, const char *key, const std::string &path) {
    return numbers<N>(field(j, key, path), path + "." + key);
}

Json pair_json(double a, double b) { return Json::array({a, b}); }

// JSON has no infinity; infinite errors are written as null.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json optional_json(const std::optional<double> &v) { return v ? finite_or_null(*v) : Json(nullptr); }

Json bbox_json(const BBox &b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

BBox bbox_from(const Json &j, const std::string &path) {
    const auto b = numbers<4>(j, path);
    try {
        return BBox::make(b[0], b[1], b[2], b[3]);
    } catch (const DomainError &e) {
        fail(path, e.what());
    }
}

template <typename F>
auto wrap_domain(const std::string &path, F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const DomainError &e) {
        fail(path, e.what());
    }
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Json to_json(const ParamState &s) {
    const auto &q = s.rotation.quaternion();
    return Json{{"quat_wxyz", {q.w(), q.x(), q.y(), q.z()}},
                {"t_m", {s.translation.x(), s.translation.y(), s.translation.z()}},
                {"focal_px", s.focal}};
}

Json to_json(const DeltaTheta &d) {
    return Json{{"v_x_px", d.v_x},
                {"v_y_px", d.v_y},
                {"v_z_ratio", d.v_z},
                {"v_r1", {d.v_r1.x(), d.v_r1.y(), d.v_r1.z()}},
                {"v_r2", {d.v_r2.x(), d.v_r2.y(), d.v_r2.z()}},
                {"v_f_log", d.v_f}};
}

Json to_json(const AnnotationRecord &r) {
    const auto &q = r.rotation.quaternion();
    return Json{{"quat_wxyz", {q.w(), q.x(), q.y(), q.z()}},
                {"t_m", {r.translation.x(), r.translation.y(), r.translation.z()}},
                {"f_px", r.focal},
                {"img_wh", {r.image_width, r.image_height}},
                {"bbox", bbox_json(r.bbox)}};
}

Json to_json(const BinghamParams &p) {
    Json mb = Json::array();
    for (int i = 0; i < 4; ++i) mb.push_back({p.mb(i, 0), p.mb(i, 1), p.mb(i, 2), p.mb(i, 3)});
    return Json{{"mb", mb}, {"z", {p.z[0], p.z[1], p.z[2], p.z[3]}}};
}

Json to_json(const Gaussian2DParams &p) {
    return Json{{"mean", pair_json(p.mean.x(), p.mean.y())},
                {"cov", {pair_json(p.covariance(0, 0), p.covariance(0, 1)),
                         pair_json(p.covariance(1, 0), p.covariance(1, 1))}}};
}

Json to_json(const NonparamDeltas &d) {
    return Json{{"rotation_rad", d.rotation}, {"x_m", d.x}, {"y_m", d.y}, {"z_m", d.z}, {"f_px", d.focal}};
}

Json to_json(const MetricRecord &m) {
    return Json{{"e_R", m.e_R},
                {"e_t", m.e_t},
                {"e_Rt", m.e_Rt},
                {"e_f", m.e_f},
                {"e_P", finite_or_null(m.e_P)},
                {"iou", optional_json(m.iou)}};
}

Json to_json(const MetricSummary &s) {
    return Json{{"count", s.count},
                {"median", {{"e_R", optional_json(s.median_e_R)},
                            {"e_t", optional_json(s.median_e_t)},
                            {"e_Rt", optional_json(s.median_e_Rt)},
                            {"e_f", optional_json(s.median_e_f)},
                            {"e_P", optional_json(s.median_e_P)}}},
                {"accuracy", {{"acc_R", s.acc_R}, {"acc_P", s.acc_P}, {"acc_D", optional_json(s.acc_D)}}},
                {"thresholds", {{"rotation_rad", s.thresholds.rotation},
                                {"projection", s.thresholds.projection},
                                {"iou", s.thresholds.iou}}}};
}

Json to_json(const UniformPoseRanges &r) {
    return Json{{"x_m", pair_json(r.x_min, r.x_max)},
                {"y_m", pair_json(r.y_min, r.y_max)},
                {"z_m", pair_json(r.z_min, r.z_max)},
                {"f_px", pair_json(r.f_min, r.f_max)}};
}

ParamState param_state_from_json(const Json &j, const std::string &path) {
    const auto q = numbers_field<4>(j, "quat_wxyz", path);
    const auto t = numbers_field<3>(j, "t_m", path);
    ParamState s;
    s.rotation = wrap_domain(path + ".quat_wxyz", [&] { return Rotation::from_quaternion(q[0], q[1], q[2], q[3]); });
    s.translation = Translation3(t[0], t[1], t[2]);
    s.focal = number_field(j, "focal_px", path);
    wrap_domain(path, [&] {
        s.validate();
        return 0;
    });
    return s;
}

AnnotationRecord annotation_from_json(const Json &j, const std::string &path) {
    const auto q = numbers_field<4>(j, "quat_wxyz", path);
    const auto t = numbers_field<3>(j, "t_m", path);
    const auto wh = numbers_field<2>(j, "img_wh", path);
    AnnotationRecord r;
    r.rotation = wrap_domain(path + ".quat_wxyz", [&] { return Rotation::from_quaternion(q[0], q[1], q[2], q[3]); });
    r.translation = Translation3(t[0], t[1], t[2]);
    r.focal = number_field(j, "f_px", path);
    if (wh[0] != std::floor(wh[0]) || wh[1] != std::floor(wh[1])) fail(path + ".img_wh", "expected integers");
    r.image_width = static_cast<int>(wh[0]);
    r.image_height = static_cast<int>(wh[1]);
    r.bbox = bbox_from(field(j, "bbox", path), path + ".bbox");
    wrap_domain(path, [&] {
        r.validate();
        return 0;
    });
    return r;
}

BinghamParams bingham_from_json(const Json &j, const std::string &path) {
    const Json &mb = field(j, "mb", path);
    if (!mb.is_array() || mb.size() != 4) fail(path + ".mb", "expected a 4x4 array");
    BinghamParams p;
    for (int i = 0; i < 4; ++i) {
        const auto row = numbers<4>(mb[static_cast<std::size_t>(i)], path + ".mb[" + std::to_string(i) + "]");
        for (int c = 0; c < 4; ++c) p.mb(i, c) = row[static_cast<std::size_t>(c)];
    }
    const auto z = numbers_field<4>(j, "z", path);
    p.z = Vec4(z[0], z[1], z[2], z[3]);
    wrap_domain(path, [&] {
        p.validate();
        return 0;
    });
    return p;
}

Gaussian2DParams gaussian_from_json(const Json &j, const std::string &path) {
    const auto m = numbers_field<2>(j, "mean", path);
    const Json &cov = field(j, "cov", path);
    if (!cov.is_array() || cov.size() != 2) fail(path + ".cov", "expected a 2x2 array");
    const auto r0 = numbers<2>(cov[0], path + ".cov[0]");
    const auto r1 = numbers<2>(cov[1], path + ".cov[1]");
    Gaussian2DParams p;
    p.mean = Vec2(m[0], m[1]);
    p.covariance << r0[0], r0[1], r1[0], r1[1];
    wrap_domain(path, [&] {
        p.validate();
        return 0;
    });
    return p;
}

NonparamDeltas deltas_from_json(const Json &j, const std::string &path) {
    NonparamDeltas d{number_field(j, "rotation_rad", path), number_field(j, "x_m", path),
                     number_field(j, "y_m", path), number_field(j, "z_m", path), number_field(j, "f_px", path)};
    wrap_domain(path, [&] {
        d.validate();
        return 0;
    });
    return d;
}

UniformPoseRanges ranges_from_json(const Json &j, const std::string &path) {
    UniformPoseRanges r;
    const auto x = numbers_field<2>(j, "x_m", path);
    const auto y = numbers_field<2>(j, "y_m", path);
    const auto z = numbers_field<2>(j, "z_m", path);
    const auto f = numbers_field<2>(j, "f_px", path);
    r.x_min = x[0], r.x_max = x[1];
    r.y_min = y[0], r.y_max = y[1];
    r.z_min = z[0], r.z_max = z[1];
    r.f_min = f[0], r.f_max = f[1];
    wrap_domain(path, [&] {
        r.validate();
        return 0;
    });
    return r;
}

std::vector<AnnotationRecord> read_annotations(std::istream &in) {
    std::vector<AnnotationRecord> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error &e) {
            fail(where, std::string("invalid JSON: ") + e.what());
        }
        // Lines written by this tool may start with the run manifest.
        if (out.empty() && j.is_object() && j.size() == 1 && j.contains("manifest")) continue;
        out.push_back(annotation_from_json(j, where));
    }
    if (out.empty()) throw FormatError("annotations: no records");
    return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path &path) {
    std::istringstream in(read_text_file(path));
    try {
        return read_annotations(in);
    } catch (const FormatError &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<ParamState> PoseDistribution::sample(std::size_t n, std::uint64_t seed) const {
    switch (kind) {
        case Kind::parametric:
            return sample_pose_parametric(parametric, n, seed);
        case Kind::nonparametric:
            return sample_pose_nonparametric(records, deltas, n, seed);
        case Kind::uniform:
            return sample_pose_uniform(uniform, n, seed);
    }
    throw std::logic_error("unknown distribution kind");
}

TargetDistribution PoseDistribution::as_targets() const {
    TargetDistribution t;
    switch (kind) {
        case Kind::parametric:
            t.source = TargetSource::parametric;
            t.parametric = parametric;
            break;
        case Kind::nonparametric:
            t.source = TargetSource::nonparametric;
            t.records = records;
            t.deltas = deltas;
            break;
        case Kind::uniform:
            t.source = TargetSource::uniform;
            t.uniform = uniform;
            break;
    }
    return t;
}

Json to_json(const PoseDistribution &d) {
    switch (d.kind) {
        case PoseDistribution::Kind::parametric:
            return Json{{"kind", "parametric"},
                        {"bingham", to_json(d.parametric.rotation)},
                        {"xy_m", to_json(d.parametric.xy)},
                        {"log_z_log_f", to_json(d.parametric.log_zf)}};
        case PoseDistribution::Kind::nonparametric: {
            Json records = Json::array();
            for (const AnnotationRecord &r : d.records) records.push_back(to_json(r));
            return Json{{"kind", "nonparametric"}, {"deltas", to_json(d.deltas)}, {"records", records}};
        }
        case PoseDistribution::Kind::uniform:
            return Json{{"kind", "uniform"}, {"ranges", to_json(d.uniform)}};
    }
    throw std::logic_error("unknown distribution kind");
}

PoseDistribution distribution_from_json(const Json &j) {
    const std::string path = "$";
    const Json &kind = field(j, "kind", path);
    if (!kind.is_string()) fail("$.kind", "expected a string");
    PoseDistribution d;
    const std::string k = kind.get<std::string>();
    if (k == "parametric") {
        d.kind = PoseDistribution::Kind::parametric;
        d.parametric.rotation = bingham_from_json(field(j, "bingham", path), "$.bingham");
        d.parametric.xy = gaussian_from_json(field(j, "xy_m", path), "$.xy_m");
        d.parametric.log_zf = gaussian_from_json(field(j, "log_z_log_f", path), "$.log_z_log_f");
    } else if (k == "nonparametric") {
        d.kind = PoseDistribution::Kind::nonparametric;
        d.deltas = deltas_from_json(field(j, "deltas", path), "$.deltas");
        const Json &records = field(j, "records", path);
        if (!records.is_array() || records.empty()) fail("$.records", "expected a non-empty array");
        for (std::size_t i = 0; i < records.size(); ++i) {
            d.records.push_back(annotation_from_json(records[i], "$.records[" + std::to_string(i) + "]"));
        }
    } else if (k == "uniform") {
        d.kind = PoseDistribution::Kind::uniform;
        d.uniform = ranges_from_json(field(j, "ranges", path), "$.ranges");
    } else {
        fail("$.kind", "expected parametric, nonparametric or uniform, got '" + k + "'");
    }
    return d;
}

std::vector<EvalPair> read_eval_pairs(std::istream &in, const std::filesystem::path &base_dir) {
    std::map<std::string, std::shared_ptr<const ModelPoints>> models;
    std::vector<EvalPair> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "pair " + std::to_string(out.size()) + " (line " + std::to_string(lineno) + ")";
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error &e) {
            fail(where, std::string("invalid JSON: ") + e.what());
        }
        if (out.empty() && j.is_object() && j.size() == 1 && j.contains("manifest")) continue;
        EvalPair p;
        p.pred = param_state_from_json(field(j, "pred", where), where + ".pred");
        p.gt = param_state_from_json(field(j, "gt", where), where + ".gt");
        p.gt_bbox = bbox_from(field(j, "gt_bbox", where), where + ".gt_bbox");
        if (j.contains("pred_bbox") && !j["pred_bbox"].is_null()) {
            p.pred_bbox = bbox_from(j["pred_bbox"], where + ".pred_bbox");
        }
        const auto wh = numbers_field<2>(j, "img_wh", where);
        p.image_diagonal = std::hypot(wh[0], wh[1]);
        if (j.contains("model_points")) {
            try {
                p.points = std::make_shared<const ModelPoints>(ModelPoints::from_json_text(j["model_points"].dump()));
            } catch (const std::exception &e) {
                fail(where + ".model_points", e.what());
            }
        } else if (j.contains("model")) {
            if (!j["model"].is_string()) fail(where + ".model", "expected a file path");
            const std::string ref = j["model"].get<std::string>();
            auto it = models.find(ref);
            if (it == models.end()) {
                try {
                    it = models.emplace(ref, std::make_shared<const ModelPoints>(ModelPoints::load(base_dir / ref))).first;
                } catch (const std::exception &e) {
                    fail(where + ".model", e.what());
                }
            }
            p.points = it->second;
        } else {
            fail(where, "missing model points (expected \"model\" or \"model_points\")");
        }
        wrap_domain(where, [&] {
            p.validate();
            return 0;
        });
        out.push_back(std::move(p));
    }
    if (out.empty()) throw FormatError("pairs: no records");
    return out;
}

std::vector<EvalPair> read_eval_pairs(const std::filesystem::path &path) {
    std::istringstream in(read_text_file(path));
    try {
        return read_eval_pairs(in, path.parent_path());
    } catch (const FormatError &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_histograms_csv(std::ostream &out, const std::vector<HistogramSpec> &specs,
                          const std::vector<HistogramRow> &rows) {
    for (const HistogramSpec &s : specs) {
        out << "# bin_edges " << s.metric << ":";
        for (double e : s.edges) out << ' ' << format_double(e);
        out << " (last bin open-ended)\n";
    }
    out << "metric,bin_lo,bin_hi,count\n";
    for (const HistogramRow &r : rows) {
        out << r.metric << ',' << format_double(r.lo) << ',' << format_double(r.hi) << ',' << r.count << '\n';
    }
}

}  // namespace rcpose
