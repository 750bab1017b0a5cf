#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "seqtoa/analysis.hpp"
#include "seqtoa/cli.hpp"
#include "seqtoa/io.hpp"
#include "test_support.hpp"

using namespace seqtoa;
namespace fs = std::filesystem;

namespace {

const std::string kData = SEQTOA_DATA_DIR;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("seqtoa_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    io::write_text(path(name), text);
    return path(name);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, EstimateRecoversTruthFromExactFrame) {
  const Scenario scn = seqtoa::testing::fixed_scenario(1e-12, 1e-12);
  const std::string frame = write("frame.json", io::to_json(noiseless_frame(scn)).dump());
  const CliRun r = run({"estimate", "--input", frame, "--output", path("report.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const io::Json rep = io::read_document(path("report.json"));
  EXPECT_EQ(rep["estimator"], "proposed");
  EXPECT_NEAR(rep["x"].get<double>(), scn.target.position.x(), 1e-6);
  EXPECT_NEAR(rep["y"].get<double>(), scn.target.position.y(), 1e-6);
  EXPECT_NEAR(rep["vx"].get<double>(), scn.target.velocity.x(), 1e-6);
  EXPECT_NEAR(rep["vy"].get<double>(), scn.target.velocity.y(), 1e-6);
  EXPECT_NEAR(rep["T"].get<double>(), scn.target.offset, 1e-6);
  EXPECT_NEAR(rep["omega"].get<double>(), scn.target.skew, 1e-6);
}

TEST_F(CliTest, EstimateWithEightAgentsIsEstimationFailure) {
  Scenario scn = seqtoa::testing::fixed_scenario(1e-3, 1e-3);
  scn.agents.resize(8);
  scn.noise = NoiseSpec::uniform(8, 1e-3, 1e-3);
  const std::string frame = write("frame.json", io::to_json(simulate_frame(scn, 1)).dump());
  const CliRun r = run({"estimate", "--input", frame});
  EXPECT_EQ(r.code, kExitEstimation);
  EXPECT_NE(r.err.find("M >= 9"), std::string::npos) << r.err;
}

TEST_F(CliTest, MalformedJsonIsInputError) {
  const std::string frame = write("frame.json", "{\"records\": [");
  const CliRun r = run({"estimate", "--input", frame});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);
}

TEST_F(CliTest, SchemaErrorNamesTheField) {
  io::Json doc = io::to_json(simulate_frame(seqtoa::testing::fixed_scenario(1e-3, 1e-3), 1));
  doc["records"][4]["p_hat"] = "here";
  const CliRun r = run({"estimate", "--input", write("frame.json", doc.dump())});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("records[4].p_hat"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingFileAndBadFlags) {
  EXPECT_EQ(run({"estimate", "--input", path("nope.json")}).code, kExitInput);
  EXPECT_EQ(run({"estimate"}).code, kExitInput);
  EXPECT_EQ(run({"frobnicate"}).code, kExitInput);
  EXPECT_EQ(run({}).code, kExitInput);
  EXPECT_EQ(run({"estimate", "--input", "x", "--estimator", "tsgtls"}).code, kExitInput);
  const CliRun help = run({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("experiment"), std::string::npos);
}

TEST_F(CliTest, SimulateThenEstimateWithEveryEstimator) {
  const std::string scenario = kData + "/fixed_topology.json";
  ASSERT_EQ(run({"simulate", "-i", scenario, "-o", path("a.json"), "--seed", "11"}).code, kExitOk);
  ASSERT_EQ(run({"simulate", "-i", scenario, "-o", path("b.json"), "--seed", "11"}).code, kExitOk);
  ASSERT_EQ(run({"simulate", "-i", scenario, "-o", path("c.json"), "--seed", "12"}).code, kExitOk);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));

  const io::FrameDocument doc = io::frame_from_json(io::read_document(path("a.json")));
  ASSERT_TRUE(doc.truth.has_value());
  for (const char* id : {"proposed", "mle", "tswls_static", "proposed_static"}) {
    const CliRun r = run({"estimate", "-i", path("a.json"), "--estimator", id});
    ASSERT_EQ(r.code, kExitOk) << id << ": " << r.err;
    const io::Json rep = io::parse_document(r.out);
    EXPECT_EQ(rep["estimator"], id);
    if (std::string(id) == "proposed" || std::string(id) == "mle") {
      EXPECT_NEAR(rep["x"].get<double>(), doc.truth->position.x(), 1.0) << id;
    }
  }
}

TEST_F(CliTest, SimulateRejectsInvalidScenario) {
  io::Json doc = io::read_document(kData + "/fixed_topology.json");
  doc["agents"][0]["t"] = 0.01;
  const CliRun r = run({"simulate", "-i", write("bad.json", doc.dump())});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("slot_origin"), std::string::npos);
}

TEST_F(CliTest, CrlbMatchesLibrary) {
  const std::string scenario = kData + "/fixed_topology.json";
  const CliRun r = run({"crlb", "-i", scenario, "--set", "noise.sigma_tau_sq_db=-20"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  io::Json doc = io::read_document(scenario);
  doc["noise"]["sigma_tau_sq_db"] = -20;
  const Matrix6 want = crlb_target(io::scenario_from_json(doc).to_scenario()).target_bound;
  const io::Json got = io::parse_document(r.out);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(got["diagonal"][k].get<double>(), want(k, k));
}

TEST_F(CliTest, ShippedSchemeOneSpecCoversNineByThree) {
  const CliRun r = run({"experiment", "-i", kData + "/scheme1_noise_sweep.json", "-o", dir_.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("mse_pos"), std::string::npos);
  std::istringstream csv(slurp(path("scheme1_noise_sweep_sweep.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "sweep_value,estimator,block,mse,bias_norm,crlb,n_success,n_diverged");
  std::set<std::pair<std::string, std::string>> pairs;
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    pairs.emplace(line.substr(0, a), line.substr(a + 1, b - a - 1));
    ++rows;
  }
  EXPECT_EQ(pairs.size(), 27u);
  EXPECT_EQ(rows, 27 * 4);
  EXPECT_TRUE(fs::exists(path("scheme1_noise_sweep_cdf.csv")));
}

TEST_F(CliTest, RepeatedExperimentIsByteIdentical) {
  const std::string spec = kData + "/scheme1_noise_sweep.json";
  const std::vector<std::string> common = {"--set", "n_trials=150", "--threads", "2"};
  auto args = [&](const std::string& out) {
    std::vector<std::string> a = {"experiment", "-i", spec, "-o", path(out)};
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  ASSERT_EQ(run(args("one")).code, kExitOk);
  ASSERT_EQ(run(args("two")).code, kExitOk);
  for (const char* f : {"/scheme1_noise_sweep_sweep.csv", "/scheme1_noise_sweep_cdf.csv"}) {
    const std::string a = slurp(path("one") + f);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(path("two") + f)) << f;
  }
}

TEST_F(CliTest, SeedFlagReplacesBaseSeed) {
  const std::string spec = kData + "/scheme1_noise_sweep.json";
  auto go = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> a = {"experiment", "-i", spec, "-o", path(out), "--set",
                                  "n_trials=20", "--set", "estimators=[\"proposed\"]"};
    a.insert(a.end(), extra.begin(), extra.end());
    EXPECT_EQ(run(a).code, kExitOk);
    return slurp(path(out) + "/scheme1_noise_sweep_sweep.csv");
  };
  const std::string base = go("base", {});
  EXPECT_NE(go("seeded", {"--seed", "99"}), base);
  EXPECT_EQ(go("again", {"--set", "base_seed=99"}), go("seeded2", {"--seed", "99"}));
}

TEST_F(CliTest, SingleTrialSpecHasNoNan) {
  const std::string spec = write("one.json", R"({"name": "single", "scheme": "noise_sweep",
      "n_trials": 1, "sweep_values": [-30], "estimators": ["proposed", "mle"]})");
  ASSERT_EQ(run({"experiment", "-i", spec, "-o", dir_.string()}).code, kExitOk);
  const std::string csv = slurp(path("single_sweep.csv"));
  EXPECT_EQ(csv.find("nan"), std::string::npos) << csv;
  EXPECT_NE(csv.find("-30,proposed,position,"), std::string::npos);
}

TEST_F(CliTest, InvalidExperimentSpecIsInputError) {
  const std::string spec = write("bad.json", R"({"scheme": "noise_sweep", "n_trials": 0, "sweep_values": [-30]})");
  const CliRun r = run({"experiment", "-i", spec, "-o", dir_.string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("n_trials"), std::string::npos);
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  const std::string spec = write("t.json", R"({"name": "env", "scheme": "noise_sweep",
      "n_trials": 30, "sweep_values": [-30]})");
  ::setenv("SEQTOA_THREADS", "3", 1);
  const CliRun a = run({"experiment", "-i", spec, "-o", path("a")});
  ::setenv("SEQTOA_THREADS", "zero", 1);
  const CliRun bad = run({"experiment", "-i", spec, "-o", path("b")});
  ::unsetenv("SEQTOA_THREADS");
  const CliRun c = run({"experiment", "-i", spec, "-o", path("c")});
  EXPECT_EQ(a.code, kExitOk);
  EXPECT_EQ(bad.code, kExitInput);
  EXPECT_EQ(c.code, kExitOk);
  EXPECT_EQ(slurp(path("a") + "/env_sweep.csv"), slurp(path("c") + "/env_sweep.csv"));
}
