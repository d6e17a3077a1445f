// rcpose: command-line front end for fitting, sampling, simulation,
// evaluation and gradient checks.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "rcpose/losses.h"
#include "rcpose/manifest.h"
#include "rcpose/metrics.h"
#include "rcpose/sampling.h"
#include "rcpose/serialization.h"
#include "rcpose/simulate_config.h"

namespace {

using namespace rcpose;

constexpr double kGradcheckFailThreshold = 1e-4;

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out = "-";
    std::string config;
    int workers = 1;
    std::string format = "json";
    bool timestamp = false;
};

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

RunManifest manifest_for(const std::string &command, const Globals &g) {
    RunManifest m;
    m.command = command;
    m.seed = g.seed;
    m.tool_version = RCPOSE_VERSION;
    if (g.timestamp) m.timestamp = utc_timestamp();
    return m;
}

// Buffers the whole artifact so a failed run never leaves a partial file.
void emit(const Globals &g, const std::string &text) {
    if (g.out == "-" || g.out.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(g.out, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError(g.out + ": cannot open for writing");
    f << text;
    if (!f) throw FormatError(g.out + ": write failed");
}

void require_json(const Globals &g, const char *command) {
    if (g.format != "json") throw UsageError(std::string(command) + " writes a single JSON document; --format csv is not supported");
}

void reject_config(const Globals &g, const char *command) {
    if (!g.config.empty()) throw UsageError(std::string("--config is only read by simulate, not ") + command);
}

std::string document(const RunManifest &m, Json body) {
    Json doc{{"manifest", m.to_json()}};
    for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

struct FitDistArgs {
    std::string annotations;
    std::string kind = "parametric";
};

int cmd_fit_dist(const Globals &g, const FitDistArgs &a) {
    require_json(g, "fit-dist");
    reject_config(g, "fit-dist");
    RunManifest m = manifest_for("fit-dist", g);
    m.config = {{"annotations", a.annotations}, {"kind", a.kind}};
    m.add_input(a.annotations);
    const std::vector<AnnotationRecord> records = read_annotations(a.annotations);
    PoseDistribution d;
    if (a.kind == "parametric") {
        d.kind = PoseDistribution::Kind::parametric;
        d.parametric = fit_parametric(records);
    } else {
        d.kind = PoseDistribution::Kind::nonparametric;
        d.deltas = select_deltas_95pct(records);
        d.records = records;
    }
    emit(g, document(m, to_json(d)));
    return 0;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string dist;
    std::string uniform;
    std::size_t n = 0;
};

int cmd_sample(const Globals &g, const SampleArgs &a) {
    reject_config(g, "sample");
    if (a.dist.empty() == a.uniform.empty()) throw UsageError("sample: give exactly one of --dist or --uniform");
    RunManifest m = manifest_for("sample", g);
    PoseDistribution d;
    if (!a.dist.empty()) {
        m.config = {{"dist", a.dist}, {"n", a.n}};
        m.add_input(a.dist);
        Json doc;
        try {
            doc = Json::parse(read_text_file(a.dist));
        } catch (const Json::parse_error &e) {
            throw FormatError(a.dist + ": invalid JSON: " + e.what());
        }
        try {
            d = distribution_from_json(doc);
        } catch (const FormatError &e) {
            throw FormatError(a.dist + ": " + e.what());
        }
    } else {
        m.config = {{"uniform", a.uniform}, {"n", a.n}};
        d.kind = PoseDistribution::Kind::uniform;
        d.uniform = a.uniform == "pix3d" ? UniformPoseRanges::pix3d() : UniformPoseRanges::stanford_cars();
    }
    const std::vector<ParamState> poses = d.sample(a.n, g.seed);
    std::ostringstream os;
    if (g.format == "json") {
        write_manifest_line(os, m);
        for (const ParamState &s : poses) os << to_json(s).dump() << '\n';
    } else {
        write_manifest_comment(os, m);
        os << "qw,qx,qy,qz,tx_m,ty_m,tz_m,focal_px\n";
        for (const ParamState &s : poses) {
            const auto &q = s.rotation.quaternion();
            os << format_double(q.w()) << ',' << format_double(q.x()) << ',' << format_double(q.y()) << ','
               << format_double(q.z()) << ',' << format_double(s.translation.x()) << ','
               << format_double(s.translation.y()) << ',' << format_double(s.translation.z()) << ','
               << format_double(s.focal) << '\n';
        }
    }
    emit(g, os.str());
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Globals &g) {
    if (g.config.empty()) throw UsageError("simulate: --config is required");
    SimulateConfig cfg = load_simulate_config(g.config, g.seed_given ? std::optional<std::uint64_t>(g.seed) : std::nullopt);
    cfg.experiment.workers = g.workers;
    RunManifest m = manifest_for("simulate", g);
    m.seed = cfg.experiment.seed;
    // Worker count is left out: it does not change the results.
    m.config = cfg.normalized;
    m.add_input(g.config);
    for (const auto &p : cfg.inputs) m.add_input(p);
    const CampaignReport report = run_experiment(cfg.experiment);
    std::ostringstream os;
    if (g.format == "json") {
        os << document(m, campaign_to_json(report, cfg.experiment.keep_trajectories));
    } else {
        write_manifest_comment(os, m);
        write_campaign_csv(os, report);
    }
    emit(g, os.str());
    return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pairs;
    std::string histograms;
    bool records = false;
};

int cmd_evaluate(const Globals &g, const EvaluateArgs &a) {
    reject_config(g, "evaluate");
    RunManifest m = manifest_for("evaluate", g);
    // Output paths are not part of the config, so reruns into other files match.
    m.config = {{"pairs", a.pairs}, {"histograms", !a.histograms.empty()}, {"records", a.records}};
    m.add_input(a.pairs);
    const std::vector<EvalPair> pairs = read_eval_pairs(a.pairs);
    std::vector<MetricRecord> records;
    records.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        try {
            records.push_back(evaluate_pair(pairs[i]));
        } catch (const DomainError &e) {
            throw FormatError("pair " + std::to_string(i) + ": " + e.what());
        }
    }
    const MetricSummary summary = aggregate(records);

    if (!a.histograms.empty()) {
        const std::vector<HistogramSpec> specs = default_histogram_specs();
        std::ostringstream hs;
        write_manifest_comment(hs, m);
        write_histograms_csv(hs, specs, histograms(records, specs));
        Globals hg = g;
        hg.out = a.histograms;
        emit(hg, hs.str());
    }

    std::ostringstream os;
    if (g.format == "json") {
        Json body{{"summary", to_json(summary)}};
        if (a.records) {
            Json rows = Json::array();
            for (const MetricRecord &r : records) rows.push_back(to_json(r));
            body["records"] = rows;
        }
        os << document(m, body);
    } else {
        const auto opt = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string(); };
        write_manifest_comment(os, m);
        os << "count,median_e_R,median_e_t,median_e_Rt,median_e_f,median_e_P,acc_R,acc_P,acc_D\n";
        os << summary.count << ',' << opt(summary.median_e_R) << ',' << opt(summary.median_e_t) << ','
           << opt(summary.median_e_Rt) << ',' << opt(summary.median_e_f) << ',' << opt(summary.median_e_P) << ','
           << format_double(summary.acc_R) << ',' << format_double(summary.acc_P) << ',' << opt(summary.acc_D)
           << '\n';
    }
    emit(g, os.str());
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::size_t points = 100;
    double step = 1e-6;
    std::size_t model_points = kDefaultLossPointCount;
};

int cmd_gradcheck(const Globals &g, const GradcheckArgs &a) {
    reject_config(g, "gradcheck");
    RunManifest m = manifest_for("gradcheck", g);
    m.config = {{"points", a.points}, {"step", a.step}, {"model_points", a.model_points}};
    GradientCampaignOptions opt;
    opt.points = a.points;
    opt.max_attempts = 10 * a.points;
    opt.model_points = a.model_points;
    opt.seed = g.seed;
    opt.check.step = a.step;
    const GradientCampaign c = run_gradient_campaign(opt);
    const bool pass = c.max_rel_error <= kGradcheckFailThreshold;
    if (c.smooth_count < a.points) {
        std::cerr << "gradcheck: only " << c.smooth_count << " smooth points in " << c.draws.size() << " draws\n";
    }

    std::ostringstream os;
    if (g.format == "json") {
        Json pts = Json::array();
        for (const GradientCampaignPoint &p : c.draws) {
            Json kinks = Json::array();
            for (std::size_t i = 0; i < p.report.components.size(); ++i) {
                if (!p.report.components[i].smooth) kinks.push_back(std::string(delta_component_name(i)));
            }
            pts.push_back({{"index", p.index},
                           {"smooth", p.report.smooth},
                           {"max_rel_error", p.report.max_rel_error},
                           {"non_smooth_components", kinks}});
        }
        Json body{{"summary", {{"draws", c.draws.size()},
                               {"smooth_points", c.smooth_count},
                               {"non_smooth_points", c.draws.size() - c.smooth_count},
                               {"max_rel_error", c.max_rel_error},
                               {"fail_threshold", kGradcheckFailThreshold},
                               {"pass", pass}}},
                  {"points", pts}};
        os << document(m, body);
    } else {
        write_manifest_comment(os, m);
        os << "index,smooth,max_rel_error,non_smooth_components\n";
        for (const GradientCampaignPoint &p : c.draws) {
            std::string kinks;
            for (std::size_t i = 0; i < p.report.components.size(); ++i) {
                if (!p.report.components[i].smooth) kinks += (kinks.empty() ? "" : ";") + std::string(delta_component_name(i));
            }
            os << p.index << ',' << (p.report.smooth ? 1 : 0) << ',' << format_double(p.report.max_rel_error) << ','
               << kinks << '\n';
        }
    }
    emit(g, os.str());
    if (!pass) std::cerr << "gradcheck: max relative error " << c.max_rel_error << " exceeds " << kGradcheckFailThreshold << '\n';
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Render-and-compare pose refinement toolkit: distributions, simulation, metrics."};
    app.set_version_flag("--version", RCPOSE_VERSION);
    app.require_subcommand(1);

    Globals g;
    auto *seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out, "Output file ('-' for stdout)")->capture_default_str();
    app.add_option("--config", g.config, "Simulate config file (JSON)");
    app.add_option("--workers", g.workers, "Worker threads for simulate (0: all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    app.add_flag("--timestamp", g.timestamp, "Record the wall-clock time in the manifest (breaks byte-identical reruns)");

    FitDistArgs fit;
    auto *fit_cmd = app.add_subcommand("fit-dist", "Fit a pose distribution to JSON-lines annotations");
    fit_cmd->add_option("--annotations", fit.annotations, "Annotations file")->required();
    fit_cmd->add_option("--kind", fit.kind, "Distribution kind")
        ->check(CLI::IsMember({"parametric", "nonparametric"}))
        ->capture_default_str();

    SampleArgs sample;
    auto *sample_cmd = app.add_subcommand("sample", "Draw poses from a distribution file or a uniform preset");
    sample_cmd->add_option("--dist", sample.dist, "Distribution file written by fit-dist");
    sample_cmd->add_option("--uniform", sample.uniform, "Uniform preset")->check(CLI::IsMember({"pix3d", "stanford_cars"}));
    sample_cmd->add_option("--n", sample.n, "Number of poses")->required();

    auto *sim_cmd = app.add_subcommand("simulate", "Run a paired update-rule campaign from --config");

    EvaluateArgs eval;
    auto *eval_cmd = app.add_subcommand("evaluate", "Score prediction/ground-truth pairs");
    eval_cmd->add_option("--pairs", eval.pairs, "Pairs file (JSON lines)")->required();
    eval_cmd->add_option("--histograms", eval.histograms, "Also write per-metric histograms to this CSV file");
    eval_cmd->add_flag("--records", eval.records, "Include per-pair metrics in the JSON report");

    GradcheckArgs grad;
    auto *grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the training loss gradients");
    grad_cmd->add_option("--points", grad.points, "Smooth points to check")->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--step", grad.step, "Central difference step")->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--model-points", grad.model_points, "Model points in the loss")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    for (CLI::App *sub : {fit_cmd, sample_cmd, sim_cmd, eval_cmd, grad_cmd}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    g.seed_given = seed_opt->count() > 0;
    if (g.workers == 0) g.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    try {
        if (*fit_cmd) return cmd_fit_dist(g, fit);
        if (*sample_cmd) return cmd_sample(g, sample);
        if (*sim_cmd) return cmd_simulate(g);
        if (*eval_cmd) return cmd_evaluate(g, eval);
        if (*grad_cmd) return cmd_gradcheck(g, grad);
    } catch (const UsageError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
