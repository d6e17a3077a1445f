#include "rcpose/simulate_config.h"

#include <cmath>
#include <limits>
#include <ostream>
#include <set>

namespace rcpose {

namespace {

[[noreturn]] void fail(const std::string &path, const std::string &what) { throw FormatError(path + ": " + what); }

// Reads the fields of one object, records them in `out`, and rejects unknown keys.
class ObjectReader {
  public:
    ObjectReader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    const std::string &path() const { return path_; }
    std::string at(const char *key) const { return path_ + "." + key; }
    bool has(const char *key) const { return j_.contains(key); }

    double number(const char *key, double fallback, double lo, double hi, bool open_lo = false) {
        double v = fallback;
        if (const Json *f = take(key)) {
            if (!f->is_number()) fail(at(key), "expected a number");
            v = f->get<double>();
        }
        if (!std::isfinite(v) || v < lo || v > hi || (open_lo && v == lo)) {
            std::string bound = std::string(open_lo ? "greater than " : "at least ") + format_double(lo);
            if (std::isfinite(hi)) bound += " and at most " + format_double(hi);
            fail(at(key), "value " + format_double(v) + " must be finite, " + bound);
        }
        out[key] = v;
        return v;
    }

    std::int64_t integer(const char *key, std::int64_t fallback, std::int64_t lo, std::int64_t hi) {
        std::int64_t v = fallback;
        if (const Json *f = take(key)) {
            if (!f->is_number_integer()) fail(at(key), "expected an integer");
            if (f->is_number_unsigned() && f->get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
                fail(at(key), "value too large");
            }
            v = f->get<std::int64_t>();
        }
        if (v < lo || v > hi) fail(at(key), "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                                std::to_string(hi) + "]");
        out[key] = v;
        return v;
    }

    std::uint64_t unsigned_integer(const char *key, std::uint64_t fallback) {
        std::uint64_t v = fallback;
        if (const Json *f = take(key)) {
            if (!f->is_number_unsigned()) fail(at(key), "expected a non-negative integer");
            v = f->get<std::uint64_t>();
        }
        out[key] = v;
        return v;
    }

    bool boolean(const char *key, bool fallback) {
        bool v = fallback;
        if (const Json *f = take(key)) {
            if (!f->is_boolean()) fail(at(key), "expected true or false");
            v = f->get<bool>();
        }
        out[key] = v;
        return v;
    }

    std::string choice(const char *key, const std::string &fallback, const std::vector<std::string> &allowed) {
        std::string v = fallback;
        if (const Json *f = take(key)) {
            if (!f->is_string()) fail(at(key), "expected a string");
            v = f->get<std::string>();
        }
        bool ok = false;
        for (const auto &a : allowed) ok = ok || a == v;
        if (!ok) {
            std::string list;
            for (const auto &a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(at(key), "expected one of " + list + ", got '" + v + "'");
        }
        out[key] = v;
        return v;
    }

    std::string string(const char *key) {
        const Json *f = take(key);
        if (!f) fail(at(key), "missing field");
        if (!f->is_string() || f->get<std::string>().empty()) fail(at(key), "expected a non-empty string");
        out[key] = *f;
        return f->get<std::string>();
    }

    template <std::size_t N>
    std::array<double, N> numbers(const char *key, const std::array<double, N> &fallback, double lo) {
        std::array<double, N> v = fallback;
        if (const Json *f = take(key)) {
            if (!f->is_array() || f->size() != N) fail(at(key), "expected an array of " + std::to_string(N) + " numbers");
            for (std::size_t i = 0; i < N; ++i) {
                const std::string p = at(key) + "[" + std::to_string(i) + "]";
                if (!(*f)[i].is_number()) fail(p, "expected a number");
                v[i] = (*f)[i].get<double>();
            }
        }
        for (std::size_t i = 0; i < N; ++i) {
            if (!std::isfinite(v[i]) || !(v[i] > lo)) {
                fail(at(key) + "[" + std::to_string(i) + "]", "must be finite and greater than " + format_double(lo));
            }
        }
        out[key] = v;
        return v;
    }

    // Sub-object (empty when absent); the caller stores the normalized form.
    const Json &object(const char *key) {
        static const Json empty = Json::object();
        const Json *f = take(key);
        return f ? *f : empty;
    }

    const Json *raw(const char *key) { return take(key); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) fail(path_ + "." + it.key(), "unknown field");
        }
    }

    Json out = Json::object();

  private:
    const Json *take(const char *key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const Json &j_;
    std::string path_;
    std::set<std::string> seen_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

NoiseSigmas read_noise(ObjectReader &r) {
    NoiseSigmas s;
    s.x_px = r.number("x_px", 0.0, 0.0, kInf);
    s.y_px = r.number("y_px", 0.0, 0.0, kInf);
    s.z_log = r.number("z_log", 0.0, 0.0, kInf);
    s.rotation_deg = r.number("rotation_deg", 0.0, 0.0, kInf);
    s.f_log = r.number("f_log", 0.0, 0.0, kInf);
    return s;
}

ClampBounds read_clamp(ObjectReader &r) {
    ClampBounds b;
    b.pixel = r.number("pixel_px", b.pixel, 0.0, kInf, true);
    b.log_depth = r.number("log_depth", b.log_depth, 0.0, kInf, true);
    b.angle_deg = r.number("angle_deg", b.angle_deg, 0.0, kInf, true);
    b.log_focal = r.number("log_focal", b.log_focal, 0.0, kInf, true);
    return b;
}

NoiseReading reading(ObjectReader &r, const char *key) {
    return r.choice(key, "std", {"std", "variance"}) == "std" ? NoiseReading::std_dev : NoiseReading::variance;
}

RefinerNoise read_refiner_noise(ObjectReader &r) {
    RefinerNoise n;
    n.focal_rel = r.number("focal_rel", n.focal_rel, 0.0, kInf);
    n.xy_m = r.number("xy_m", n.xy_m, 0.0, kInf);
    n.z_m = r.number("z_m", n.z_m, 0.0, kInf);
    n.euler_deg = r.number("euler_deg", n.euler_deg, 0.0, kInf);
    n.focal_reading = reading(r, "focal_reading");
    n.euler_reading = reading(r, "euler_reading");
    return n;
}

UniformPoseRanges read_ranges(ObjectReader &r, const UniformPoseRanges &base) {
    UniformPoseRanges u = base;
    const auto pair = [&](const char *key, double &lo, double &hi) {
        const auto v = r.numbers<2>(key, {lo, hi}, -kInf);
        lo = v[0];
        hi = v[1];
    };
    pair("x_m", u.x_min, u.x_max);
    pair("y_m", u.y_min, u.y_max);
    pair("z_m", u.z_min, u.z_max);
    pair("f_px", u.f_min, u.f_max);
    try {
        u.validate();
    } catch (const DomainError &e) {
        fail(r.path(), e.what());
    }
    return u;
}

}  // namespace

SimulateConfig parse_simulate_config(const Json &doc, const std::filesystem::path &base_dir,
                                     std::optional<std::uint64_t> seed) {
    SimulateConfig cfg;
    ExperimentConfig &e = cfg.experiment;
    ObjectReader top(doc, "$");

    e.trial.iterations = static_cast<int>(top.integer("iterations", 15, 1, 100000));
    e.trials = static_cast<int>(top.integer("trials", 100, 1, 100000000));
    e.seed = top.unsigned_integer("seed", 0);
    if (seed) {
        e.seed = *seed;
        top.out["seed"] = *seed;
    }
    e.trial.image_diagonal = top.number("image_diagonal_px", 800.0, 0.0, kInf, true);
    e.keep_trajectories = top.boolean("keep_trajectories", false);

    // Arms
    if (const Json *arms = top.raw("arms")) {
        if (!arms->is_array() || arms->empty()) fail("$.arms", "expected a non-empty array of rule names");
        e.arms.clear();
        for (std::size_t i = 0; i < arms->size(); ++i) {
            const Json &a = (*arms)[i];
            const std::string p = "$.arms[" + std::to_string(i) + "]";
            if (!a.is_string()) fail(p, "expected \"exact\" or \"legacy\"");
            const std::string name = a.get<std::string>();
            if (name == "exact") {
                e.arms.push_back(UpdateRule::exact);
            } else if (name == "legacy") {
                e.arms.push_back(UpdateRule::legacy);
            } else {
                fail(p, "expected \"exact\" or \"legacy\", got '" + name + "'");
            }
        }
    }
    top.out["arms"] = Json::array();
    for (UpdateRule r : e.arms) top.out["arms"].push_back(to_string(r));

    // Predictor
    {
        ObjectReader r(top.object("predictor"), "$.predictor");
        const std::string kind = r.choice("kind", "oracle", {"oracle", "noisy", "clamped"});
        e.trial.predictor.kind = kind == "oracle" ? PredictorKind::oracle
                                 : kind == "noisy" ? PredictorKind::noisy
                                                   : PredictorKind::clamped;
        ObjectReader noise(r.object("noise"), "$.predictor.noise");
        e.trial.predictor.noise = read_noise(noise);
        noise.finish();
        r.out["noise"] = noise.out;
        ObjectReader clamp(r.object("clamp"), "$.predictor.clamp");
        e.trial.predictor.clamp = read_clamp(clamp);
        clamp.finish();
        r.out["clamp"] = clamp.out;
        r.finish();
        top.out["predictor"] = r.out;
    }

    // Initialization
    {
        ObjectReader r(top.object("init"), "$.init");
        e.trial.init = r.choice("source", "bbox", {"bbox", "refiner_noise"}) == "bbox" ? InitSource::bbox
                                                                                        : InitSource::refiner_noise;
        ObjectReader noise(r.object("noise"), "$.init.noise");
        e.trial.init_noise = read_refiner_noise(noise);
        noise.finish();
        r.out["noise"] = noise.out;
        r.finish();
        top.out["init"] = r.out;
    }

    // Convergence tolerance
    {
        ObjectReader r(top.object("tolerance"), "$.tolerance");
        e.trial.tolerance.rotation = r.number("e_R", 1e-6, 0.0, kInf);
        e.trial.tolerance.translation = r.number("e_t", 1e-6, 0.0, kInf);
        e.trial.tolerance.focal = r.number("e_f", 1e-6, 0.0, kInf);
        r.finish();
        top.out["tolerance"] = r.out;
    }

    // Targets
    {
        ObjectReader r(top.object("targets"), "$.targets");
        const std::string source = r.choice("source", "uniform", {"uniform", "distribution"});
        if (source == "uniform") {
            const std::string preset = r.choice("preset", "stanford_cars", {"pix3d", "stanford_cars"});
            ObjectReader ranges(r.object("ranges"), "$.targets.ranges");
            e.targets.source = TargetSource::uniform;
            e.targets.uniform = read_ranges(ranges, preset == "pix3d" ? UniformPoseRanges::pix3d()
                                                                      : UniformPoseRanges::stanford_cars());
            ranges.finish();
            r.out["ranges"] = ranges.out;
        } else {
            const std::string file = r.string("path");
            const std::filesystem::path p = base_dir / file;
            Json dist;
            try {
                dist = Json::parse(read_text_file(p));
            } catch (const Json::parse_error &err) {
                fail("$.targets.path", p.string() + ": invalid JSON: " + err.what());
            } catch (const FormatError &err) {
                fail("$.targets.path", err.what());
            }
            try {
                e.targets = distribution_from_json(dist).as_targets();
            } catch (const FormatError &err) {
                fail("$.targets.path", p.string() + ": " + err.what());
            }
            cfg.inputs.push_back(p);
        }
        r.finish();
        top.out["targets"] = r.out;
    }

    // Model points
    {
        ObjectReader r(top.object("model"), "$.model");
        const auto count = static_cast<std::size_t>(r.integer("points", kDefaultLossPointCount, 1, 10000000));
        const std::uint64_t model_seed = r.unsigned_integer("seed", 0);
        if (r.has("path")) {
            const std::filesystem::path p = base_dir / r.string("path");
            try {
                e.points = std::make_shared<const ModelPoints>(ModelPoints::load(p).subsample(count, model_seed));
            } catch (const std::exception &err) {
                fail("$.model.path", err.what());
            }
            cfg.inputs.push_back(p);
        } else {
            const auto box = r.numbers<3>("box_m", {0.5, 0.4, 0.3}, 0.0);
            e.points = std::make_shared<const ModelPoints>(
                ModelPoints::box_surface(Vec3(box[0], box[1], box[2]), count, model_seed));
        }
        r.finish();
        top.out["model"] = r.out;
    }

    top.finish();
    try {
        e.trial.validate();
        e.trial.predictor.noise.validate();
        e.trial.predictor.clamp.validate();
    } catch (const DomainError &err) {
        fail("$", err.what());
    }
    cfg.normalized = std::move(top.out);
    return cfg;
}

SimulateConfig load_simulate_config(const std::filesystem::path &path, std::optional<std::uint64_t> seed) {
    Json doc;
    try {
        doc = Json::parse(read_text_file(path));
    } catch (const Json::parse_error &e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_simulate_config(doc, path.parent_path(), seed);
}

Json campaign_to_json(const CampaignReport &report, bool with_trajectories) {
    Json arms = Json::array();
    for (const ArmReport &a : report.arms) {
        Json per_iter = Json::array();
        for (const MetricSummary &s : a.per_iteration) per_iter.push_back(to_json(s));
        Json arm{{"rule", to_string(a.rule)},
                 {"converged", a.converged},
                 {"final", to_json(a.final_summary)},
                 {"per_iteration", per_iter}};
        if (with_trajectories) {
            Json trials = Json::array();
            for (const TrialResult &t : a.trials) {
                Json traj = Json::array();
                for (const MetricRecord &m : t.trajectory) traj.push_back(to_json(m));
                trials.push_back({{"converged", t.converged}, {"final_state", to_json(t.final_state)}, {"trajectory", traj}});
            }
            arm["trials"] = trials;
        }
        arms.push_back(arm);
    }
    return Json{{"arms", arms}};
}

void write_campaign_csv(std::ostream &out, const CampaignReport &report) {
    const auto opt = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string(); };
    out << "rule,iteration,median_e_R,median_e_t,median_e_Rt,median_e_f,median_e_P,acc_R,acc_P\n";
    for (const ArmReport &a : report.arms) {
        for (std::size_t k = 0; k < a.per_iteration.size(); ++k) {
            const MetricSummary &s = a.per_iteration[k];
            out << to_string(a.rule) << ',' << k << ',' << opt(s.median_e_R) << ',' << opt(s.median_e_t) << ','
                << opt(s.median_e_Rt) << ',' << opt(s.median_e_f) << ',' << opt(s.median_e_P) << ','
                << format_double(s.acc_R) << ',' << format_double(s.acc_P) << '\n';
        }
    }
}

}  // namespace rcpose
