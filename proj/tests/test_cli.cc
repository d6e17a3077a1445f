#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/QR>

#include "rcpose/manifest.h"
#include "rcpose/serialization.h"
#include "test_util.h"

namespace rcpose {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per test.
class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("rcpose_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the binary inside the scratch directory; returns the exit status.
    int run(const std::string &args) {
        const std::string cmd = "cd '" + dir_.string() + "' && '" RCPOSE_CLI_PATH "' " + args + " > stdout.txt 2> stderr.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string file(const std::string &name) const { return read_text_file(dir_ / name); }
    void write(const std::string &name, const std::string &text) const {
        std::ofstream(dir_ / name, std::ios::binary) << text;
    }
    std::string err() const { return file("stderr.txt"); }

    fs::path dir_;
};

std::vector<Json> json_lines(const std::string &text) {
    std::vector<Json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(Json::parse(line));
    return out;
}

std::string annotations_text(const std::vector<ParamState> &states) {
    std::string out;
    for (const ParamState &s : states) {
        AnnotationRecord r;
        r.rotation = s.rotation;
        r.translation = s.translation;
        r.focal = s.focal;
        r.image_width = 640;
        r.image_height = 480;
        r.bbox = BBox::make(100, 100, 300, 250);
        out += to_json(r).dump() + "\n";
    }
    return out;
}

TEST_F(Cli, VersionAndUsage) {
    EXPECT_EQ(run("--version"), 0);
    EXPECT_NE(file("stdout.txt").find("0.1.0"), std::string::npos);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("sample --n 1 --uniform mars"), 2);
    EXPECT_EQ(run("sample --n 1"), 2);
    // Global options are accepted after the subcommand too.
    ASSERT_EQ(run("sample --uniform pix3d --n 1 --seed 12 --out a.jsonl"), 0) << err();
    EXPECT_EQ(json_lines(file("a.jsonl"))[0]["manifest"]["seed"], 12);
}

TEST_F(Cli, SampleIsByteIdenticalUnderSeed) {
    for (const char *fmt : {"json", "csv"}) {
        const std::string base = std::string("--seed 5 --format ") + fmt + " sample --uniform pix3d --n 200 --out ";
        ASSERT_EQ(run(base + "a.out"), 0) << err();
        ASSERT_EQ(run(base + "b.out"), 0) << err();
        EXPECT_EQ(file("a.out"), file("b.out"));
        ASSERT_EQ(run(std::string("--seed 6 --format ") + fmt + " sample --uniform pix3d --n 200 --out c.out"), 0);
        EXPECT_NE(file("a.out"), file("c.out"));
    }
    const std::string csv = file("a.out");
    EXPECT_EQ(csv.rfind("# {", 0), 0u);
    EXPECT_NE(csv.find("\nqw,qx,qy,qz,tx_m,ty_m,tz_m,focal_px\n"), std::string::npos);
}

TEST_F(Cli, SampleZeroWritesManifestOnly) {
    ASSERT_EQ(run("sample --uniform stanford_cars --n 0 --out empty.jsonl"), 0) << err();
    const auto lines = json_lines(file("empty.jsonl"));
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(lines[0]["manifest"]["command"], "sample");
    EXPECT_EQ(lines[0]["manifest"]["config"]["n"], 0);
}

TEST_F(Cli, FitDistRecoversGeneratingParameters) {
    // Sofa-like setup: concentrated rotations, pose and focal from known Gaussians.
    ParametricPoseModel truth;
    Eigen::HouseholderQR<Mat4> qr(Mat4::Random());
    truth.rotation.mb = qr.householderQ();
    truth.rotation.z = Vec4(-40.0, -12.0, -3.0, 0.0);
    truth.xy.mean = Vec2(0.01, -0.02);
    truth.xy.covariance << 4e-4, 1e-4, 1e-4, 9e-4;
    truth.log_zf.mean = Vec2(std::log(1.3), std::log(700.0));
    truth.log_zf.covariance << 0.03, 0.01, 0.01, 0.06;
    const std::size_t n = 100000;
    write("ann.jsonl", annotations_text(sample_pose_parametric(truth, n, 21)));

    ASSERT_EQ(run("fit-dist --annotations ann.jsonl --kind parametric --out dist.json"), 0) << err();
    const Json doc = Json::parse(file("dist.json"));
    EXPECT_EQ(doc["manifest"]["inputs"][0]["sha256"], sha256_file(dir_ / "ann.jsonl"));
    const PoseDistribution d = distribution_from_json(doc);
    ASSERT_EQ(d.kind, PoseDistribution::Kind::parametric);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(d.parametric.rotation.z[i], truth.rotation.z[i], 0.15 * std::abs(truth.rotation.z[i])) << i;
    }
    const auto &xy = d.parametric.xy;
    const auto &zf = d.parametric.log_zf;
    EXPECT_LE((zf.mean - truth.log_zf.mean).norm(), 0.01 * truth.log_zf.mean.norm());
    EXPECT_LE((zf.covariance - truth.log_zf.covariance).norm(), 0.05 * truth.log_zf.covariance.norm());
    EXPECT_LE((xy.covariance - truth.xy.covariance).norm(), 0.05 * truth.xy.covariance.norm());

    // Draws from the fitted file stay in front of the camera with positive focal.
    ASSERT_EQ(run("--seed 3 sample --dist dist.json --n 100000 --out s.jsonl"), 0) << err();
    const auto lines = json_lines(file("s.jsonl"));
    ASSERT_EQ(lines.size(), n + 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        ASSERT_GT(lines[i]["t_m"][2].get<double>(), 0.0);
        ASSERT_GT(lines[i]["focal_px"].get<double>(), 0.0);
    }
}

TEST_F(Cli, FitDistIsByteIdenticalAndSupportsNonparametric) {
    write("ann.jsonl", annotations_text(sample_pose_uniform(UniformPoseRanges::pix3d(), 300, 4)));
    for (const char *kind : {"parametric", "nonparametric"}) {
        const std::string base = std::string("fit-dist --annotations ann.jsonl --kind ") + kind + " --out ";
        ASSERT_EQ(run(base + "a.json"), 0) << err();
        ASSERT_EQ(run(base + "b.json"), 0) << err();
        EXPECT_EQ(file("a.json"), file("b.json"));
        ASSERT_EQ(run("--seed 2 sample --dist a.json --n 50 --out s1.jsonl"), 0) << err();
        ASSERT_EQ(run("--seed 2 sample --dist a.json --n 50 --out s2.jsonl"), 0) << err();
        EXPECT_EQ(file("s1.jsonl"), file("s2.jsonl"));
    }
}

TEST_F(Cli, FitDistInputErrors) {
    write("empty.jsonl", "\n");
    EXPECT_NE(run("fit-dist --annotations empty.jsonl"), 0);
    EXPECT_NE(err().find("no records"), std::string::npos) << err();

    Rng rng = make_rng(8);
    std::vector<ParamState> three{testing::random_state(rng), testing::random_state(rng), testing::random_state(rng)};
    write("three.jsonl", annotations_text(three));
    // Gaussians accept three records; the rotation fit cannot.
    EXPECT_NE(run("fit-dist --annotations three.jsonl --kind parametric --out d.json"), 0);
    EXPECT_NE(err().find("bingham"), std::string::npos) << err();
    EXPECT_FALSE(fs::exists(dir_ / "d.json"));

    write("bad.jsonl", annotations_text(three) + "{not json}\n");
    EXPECT_NE(run("fit-dist --annotations bad.jsonl"), 0);
    EXPECT_NE(err().find("line 4"), std::string::npos) << err();

    EXPECT_NE(run("--format csv fit-dist --annotations three.jsonl"), 0);
}

constexpr const char *kSmallCampaign =
    R"({"iterations": 15, "trials": 40, "arms": ["exact", "legacy"],
        "predictor": {"kind": "clamped", "noise": {"x_px": 6, "y_px": 6, "z_log": 0.05, "rotation_deg": 15, "f_log": 0.15}},
        "init": {"source": "refiner_noise"}, "targets": {"preset": "pix3d"}, "model": {"points": 100}})";

TEST_F(Cli, SimulateIsByteIdenticalAcrossRunsAndWorkerCounts) {
    write("cfg.json", kSmallCampaign);
    ASSERT_EQ(run("--seed 9 --config cfg.json simulate --out a.json"), 0) << err();
    ASSERT_EQ(run("--seed 9 --config cfg.json --workers 3 simulate --out b.json"), 0) << err();
    EXPECT_EQ(file("a.json"), file("b.json"));
    ASSERT_EQ(run("--seed 9 --config cfg.json --format csv simulate --out a.csv"), 0) << err();
    ASSERT_EQ(run("--seed 9 --config cfg.json --format csv simulate --out b.csv"), 0) << err();
    EXPECT_EQ(file("a.csv"), file("b.csv"));
    EXPECT_NE(file("a.csv").find("\nrule,iteration,median_e_R"), std::string::npos);

    const Json report = Json::parse(file("a.json"));
    ASSERT_EQ(report["arms"].size(), 2u);
    EXPECT_EQ(report["arms"][0]["per_iteration"].size(), 16u);

    // The manifest config reruns the same campaign.
    write("again.json", report["manifest"]["config"].dump());
    ASSERT_EQ(run("--config again.json simulate --out c.json"), 0) << err();
    EXPECT_EQ(Json::parse(file("c.json"))["arms"], report["arms"]);
}

TEST_F(Cli, SimulateAcceptsShortAndLongIterationCounts) {
    for (int k : {15, 55}) {
        write("cfg.json", R"({"iterations": )" + std::to_string(k) + R"(, "trials": 5, "model": {"points": 50}})");
        ASSERT_EQ(run("--config cfg.json simulate --out r.json"), 0) << err();
        EXPECT_EQ(Json::parse(file("r.json"))["arms"][0]["per_iteration"].size(), static_cast<std::size_t>(k + 1));
    }
}

TEST_F(Cli, SimulateReportsSchemaErrorsWithFieldPath) {
    write("cfg.json", R"({"predictor": {"kind": "clamped", "clamp": {"pixel_px": "wide"}}})");
    EXPECT_NE(run("--config cfg.json simulate"), 0);
    EXPECT_NE(err().find("$.predictor.clamp.pixel_px"), std::string::npos) << err();
    write("cfg.json", R"({"trials": 10, "target": {}})");
    EXPECT_NE(run("--config cfg.json simulate"), 0);
    EXPECT_NE(err().find("$.target: unknown field"), std::string::npos) << err();
    EXPECT_NE(run("simulate"), 0);
}

std::string identity_pairs(std::size_t n) {
    Rng rng = make_rng(31);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        const Json s = to_json(testing::random_state(rng));
        out += Json{{"pred", s}, {"gt", s}, {"gt_bbox", {10, 10, 90, 70}}, {"img_wh", {640, 480}},
                    {"pred_bbox", {10, 10, 90, 70}}, {"model", "box.json"}}
                   .dump() +
               "\n";
    }
    return out;
}

TEST_F(Cli, EvaluatePerfectPredictions) {
    write("box.json", "[[0.1,0.1,0.1],[-0.1,0.2,0.0],[0.0,-0.1,0.15],[0.05,0.0,-0.1]]");
    write("pairs.jsonl", identity_pairs(25));
    ASSERT_EQ(run("evaluate --pairs pairs.jsonl --histograms h.csv --out e.json"), 0) << err();
    const Json s = Json::parse(file("e.json"))["summary"];
    EXPECT_EQ(s["count"], 25);
    for (const char *m : {"e_R", "e_t", "e_Rt", "e_f", "e_P"}) EXPECT_EQ(s["median"][m].get<double>(), 0.0) << m;
    for (const char *a : {"acc_R", "acc_P", "acc_D"}) EXPECT_EQ(s["accuracy"][a].get<double>(), 1.0) << a;
    // Table order of the report columns.
    std::vector<std::string> keys;
    for (auto it = s["median"].begin(); it != s["median"].end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"e_R", "e_t", "e_Rt", "e_f", "e_P"}));
    EXPECT_NE(file("h.csv").find("metric,bin_lo,bin_hi,count"), std::string::npos);

    ASSERT_EQ(run("--format csv evaluate --pairs pairs.jsonl --out a.csv"), 0) << err();
    ASSERT_EQ(run("--format csv evaluate --pairs pairs.jsonl --out b.csv"), 0) << err();
    EXPECT_EQ(file("a.csv"), file("b.csv"));
}

TEST_F(Cli, EvaluateMissingModelNamesPair) {
    write("box.json", "[[0.1,0.1,0.1],[-0.1,0.2,0.0]]");
    std::string text = identity_pairs(3);
    const std::size_t at = text.find("box.json", text.find('\n'));
    text.replace(at, 8, "gone.obj");
    write("pairs.jsonl", text);
    EXPECT_NE(run("evaluate --pairs pairs.jsonl"), 0);
    EXPECT_NE(err().find("pair 1"), std::string::npos) << err();
}

TEST_F(Cli, GradcheckPassesAndIsDeterministic) {
    ASSERT_EQ(run("--seed 4 gradcheck --out a.json"), 0) << err();
    ASSERT_EQ(run("--seed 4 gradcheck --out b.json"), 0) << err();
    EXPECT_EQ(file("a.json"), file("b.json"));
    const Json r = Json::parse(file("a.json"));
    EXPECT_EQ(r["manifest"]["config"]["points"], 100);
    EXPECT_EQ(r["manifest"]["config"]["step"], 1e-6);
    EXPECT_EQ(r["summary"]["smooth_points"], 100);
    EXPECT_LE(r["summary"]["max_rel_error"].get<double>(), 1e-5);
    EXPECT_TRUE(r["summary"]["pass"].get<bool>());
    // Points near an L1 kink are reported, not scored.
    bool flagged = false;
    for (const Json &p : r["points"]) flagged = flagged || !p["smooth"].get<bool>();
    EXPECT_TRUE(flagged);
}

TEST_F(Cli, GradcheckExitCodeFollowsErrorThreshold) {
    // With a single model point few draws hit a kink, and h = 1e-2 leaves
    // central-difference truncation error above 1e-4 at a smooth point.
    EXPECT_EQ(run("gradcheck --points 5 --model-points 1 --step 1e-2 --out r.json"), 1) << err();
    const Json r = Json::parse(file("r.json"))["summary"];
    EXPECT_FALSE(r["pass"].get<bool>());
    EXPECT_GT(r["smooth_points"].get<int>(), 0);
    EXPECT_GT(r["max_rel_error"].get<double>(), 1e-4);
    EXPECT_EQ(run("gradcheck --points 5 --model-points 1 --step 1e-3 --out r.json"), 0) << err();
}

}  // namespace
}  // namespace rcpose
