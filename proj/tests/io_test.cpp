#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "seqtoa/io.hpp"
#include "test_support.hpp"

using namespace seqtoa;
using namespace seqtoa::io;

namespace {

const std::string kData = SEQTOA_DATA_DIR;

std::string schema_field(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "<no error>";
}

Json minimal_scenario() {
  return parse_document(R"({
    "agents": [{"p": [0, 0], "T": 0, "t": 0}, {"p": [10, 0], "T": 0.5, "t": 0.05}],
    "target": {"p": [3, 4], "v": [1, 0], "T": 2, "omega": 30},
    "noise": {"sigma_tau_sq_db": -30, "agent_sigma_sq_db": [-20, -10]}
  })");
}

}  // namespace

TEST(ScenarioJson, ShippedScenarioRoundTrips) {
  const ScenarioConfig a = scenario_from_json(read_document(kData + "/fixed_topology.json"));
  const ScenarioConfig b = scenario_from_json(to_json(a));
  EXPECT_TRUE(a == b);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.agents.size(), 10u);
  EXPECT_TRUE(validate_scenario(a.to_scenario()).empty());
}

TEST(ScenarioJson, DecibelNoiseConversion) {
  const Scenario scn = scenario_from_json(minimal_scenario()).to_scenario();
  ASSERT_EQ(scn.num_agents(), 2);
  EXPECT_NEAR(scn.noise.toa_var(1), 1e-3, 1e-18);
  EXPECT_NEAR(scn.noise.agent_cov(0, 0), 1e-2, 1e-17);
  EXPECT_NEAR(scn.noise.agent_cov(5, 5), 1e-1, 1e-16);
  EXPECT_EQ(scn.noise.agent_cov(0, 3), 0.0);
  EXPECT_EQ(scn.target.skew, 30.0);
  EXPECT_EQ(scn.agents[1].slot_time, 0.05);
}

TEST(ScenarioJson, SamplingSpecIsSeededAndBounded) {
  Json doc = minimal_scenario();
  doc["noise"]["agent_sigma_sq_db"] = {{"center_db", -20.5}, {"half_width_db", 5.0}, {"seed", 7}};
  const ScenarioConfig cfg = scenario_from_json(doc);
  const Scenario a = cfg.to_scenario();
  const Scenario b = cfg.to_scenario();
  EXPECT_EQ(a.noise.agent_cov, b.noise.agent_cov);
  for (int m = 0; m < 2; ++m) {
    const double db = variance_to_db(a.noise.agent_cov(3 * m, 3 * m));
    EXPECT_GE(db, -25.5 - 1e-9);
    EXPECT_LE(db, -15.5 + 1e-9);
  }
  EXPECT_TRUE(scenario_from_json(to_json(cfg)) == cfg);
}

TEST(ScenarioJson, SchemaViolationsNameTheField) {
  Json doc = minimal_scenario();
  doc["target"].erase("omega");
  EXPECT_EQ(schema_field([&] { scenario_from_json(doc); }), "target.omega");

  doc = minimal_scenario();
  doc["agents"][1]["p"] = {1.0};
  EXPECT_EQ(schema_field([&] { scenario_from_json(doc); }), "agents[1].p");

  doc = minimal_scenario();
  doc["agents"][0]["T"] = "zero";
  EXPECT_EQ(schema_field([&] { scenario_from_json(doc); }), "agents[0].T");

  doc = minimal_scenario();
  doc["noise"]["agent_sigma_sq_db"] = {-20.0};
  EXPECT_EQ(schema_field([&] { scenario_from_json(doc); }), "noise.agent_sigma_sq_db");

  doc = minimal_scenario();
  doc.erase("noise");
  EXPECT_EQ(schema_field([&] { scenario_from_json(doc); }), "noise");
}

TEST(Documents, MalformedJsonReportsPosition) {
  try {
    parse_document("{\n  \"agents\": [1, 2,\n}");
    FAIL() << "expected a SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_document("/nonexistent/seqtoa.json"), std::runtime_error);
}

TEST(FrameJson, RoundTripKeepsEveryBit) {
  const Scenario scn = seqtoa::testing::fixed_scenario(1e-3, 2e-3);
  const ObservedFrame frame = simulate_frame(scn, 4);
  const Json doc = parse_document(to_json(frame, scn.target).dump());
  const FrameDocument back = frame_from_json(doc);
  ASSERT_EQ(back.frame.num_agents(), frame.num_agents());
  for (int i = 0; i < frame.num_agents(); ++i) {
    EXPECT_EQ(back.frame.records[i].toa, frame.records[i].toa);
    EXPECT_EQ(back.frame.records[i].slot_time, frame.records[i].slot_time);
    EXPECT_EQ(back.frame.records[i].broadcast.position, frame.records[i].broadcast.position);
    EXPECT_EQ(back.frame.records[i].broadcast.offset, frame.records[i].broadcast.offset);
  }
  EXPECT_EQ(back.frame.noise.toa_var, frame.noise.toa_var);
  EXPECT_EQ(back.frame.noise.agent_cov, frame.noise.agent_cov);
  ASSERT_TRUE(back.truth.has_value());
  EXPECT_EQ(back.truth->to_vector(), scn.target.to_vector());
  EXPECT_TRUE(doc["noise"].contains("agent_var"));
}

TEST(FrameJson, FullAgentCovariance) {
  Scenario scn = seqtoa::testing::fixed_scenario(1e-3, 2e-3);
  scn.noise.agent_cov(0, 4) = scn.noise.agent_cov(4, 0) = 1e-4;
  const ObservedFrame frame = simulate_frame(scn, 4);
  const Json doc = to_json(frame);
  EXPECT_TRUE(doc["noise"].contains("agent_cov"));
  EXPECT_FALSE(doc.contains("truth"));
  EXPECT_EQ(frame_from_json(doc).frame.noise.agent_cov, frame.noise.agent_cov);
}

TEST(FrameJson, SchemaViolations) {
  Json doc = to_json(simulate_frame(seqtoa::testing::fixed_scenario(1e-3, 1e-3), 1));
  Json bad = doc;
  bad["records"][2].erase("tau");
  EXPECT_EQ(schema_field([&] { frame_from_json(bad); }), "records[2].tau");
  bad = doc;
  bad["noise"]["toa_var"].erase(0);
  EXPECT_EQ(schema_field([&] { frame_from_json(bad); }), "noise.toa_var");
  bad = doc;
  bad["noise"]["agent_cov"] = Json::array();
  EXPECT_EQ(schema_field([&] { frame_from_json(bad); }), "noise");
  bad = doc;
  bad["noise"]["agent_var"][3] = -1.0;
  EXPECT_EQ(schema_field([&] { frame_from_json(bad); }), "noise.agent_var[3]");
}

TEST(ExperimentJson, ShippedSpecsRoundTrip) {
  for (const char* name : {"scheme1_noise_sweep", "scheme2_ltco_sweep", "scheme3_random_topology"}) {
    const Json doc = read_document(kData + "/" + name + ".json");
    const ExperimentSpec a = experiment_from_json(doc);
    const ExperimentSpec b = experiment_from_json(parse_document(to_json(a).dump()));
    EXPECT_TRUE(a == b) << name;
    EXPECT_EQ(a.name, name);
    EXPECT_EQ(to_json(a), doc) << name;
  }
}

TEST(ExperimentJson, ShippedSpecContents) {
  const ExperimentSpec s1 = experiment_from_json(read_document(kData + "/scheme1_noise_sweep.json"));
  EXPECT_EQ(s1.scheme, Scheme::kNoiseSweep);
  EXPECT_EQ(s1.sweep_values.size(), 9u);
  EXPECT_EQ(s1.estimators.size(), 3u);
  EXPECT_EQ(s1.n_trials, 3000);
  EXPECT_TRUE(s1.topology == canonical_fixed_topology());

  const ExperimentSpec s2 = experiment_from_json(read_document(kData + "/scheme2_ltco_sweep.json"));
  EXPECT_EQ(s2.scheme, Scheme::kLtcoSweep);
  EXPECT_NEAR(s2.sweep_values.front(), seconds_to_range(10e-9), 1e-9);
  EXPECT_NEAR(s2.sweep_values.back(), seconds_to_range(1e-3), 1e-6);

  const ExperimentSpec s3 =
      experiment_from_json(read_document(kData + "/scheme3_random_topology.json"));
  EXPECT_TRUE(s3.random_topology);
  EXPECT_EQ(s3.n_trials, 10000);
  EXPECT_EQ(s3.sweep_values, std::vector<double>{-20.5});
}

TEST(ExperimentJson, DefaultsAndErrors) {
  const ExperimentSpec spec = experiment_from_json(
      parse_document(R"({"scheme": "noise_sweep", "n_trials": 5, "sweep_values": [-30]})"));
  EXPECT_EQ(spec.estimators, std::vector<std::string>{"proposed"});
  EXPECT_TRUE(spec.topology == canonical_fixed_topology());
  EXPECT_TRUE(spec.bounds == ScenarioBounds{});

  EXPECT_EQ(schema_field([] {
              experiment_from_json(parse_document(R"({"scheme": "fig2", "n_trials": 5, "sweep_values": [1]})"));
            }),
            "scheme");
  EXPECT_EQ(schema_field([] {
              experiment_from_json(parse_document(R"({"scheme": "noise_sweep", "n_trials": 0, "sweep_values": [1]})"));
            }),
            "n_trials");
  EXPECT_EQ(schema_field([] {
              experiment_from_json(parse_document(
                  R"({"scheme": "noise_sweep", "n_trials": 1, "sweep_values": [1], "estimators": ["mle", "x"]})"));
            }),
            "estimators[1]");
  EXPECT_EQ(schema_field([] {
              experiment_from_json(parse_document(
                  R"({"scheme": "noise_sweep", "n_trials": 1, "sweep_values": [1], "bounds": {"velocity": [3, 1]}})"));
            }),
            "bounds.velocity");
}

TEST(Overrides, NestedScalarsAndStrings) {
  Json doc = parse_document(R"({"n_trials": 10, "bounds": {"sigma_tau_sq_db": -30}})");
  apply_override(doc, "n_trials=25");
  apply_override(doc, "bounds.sigma_tau_sq_db=-20.5");
  apply_override(doc, "name=quick run");
  apply_override(doc, "topology.kind=random");
  EXPECT_EQ(doc["n_trials"], 25);
  EXPECT_EQ(doc["bounds"]["sigma_tau_sq_db"], -20.5);
  EXPECT_EQ(doc["name"], "quick run");
  EXPECT_EQ(doc["topology"]["kind"], "random");
  EXPECT_THROW(apply_override(doc, "n_trials"), SchemaError);
  EXPECT_THROW(apply_override(doc, "n_trials.x=1"), SchemaError);
  EXPECT_THROW(apply_override(doc, "a..b=1"), SchemaError);
}

TEST(Csv, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 299792.458, 6.02214076e23}) {
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(Csv, SweepAndCdfLayout) {
  ExperimentResult res;
  SweepPoint p;
  p.sweep_value = -30.0;
  TrialStats s;
  s.mse_position = 0.5;
  s.mse_velocity = 2.0;
  s.bias << 3, 4, 0, 0, 1, 0;
  s.crlb_mean.diagonal() << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  s.cdf_samples = {0.25, 0.75};
  s.n_success = 2;
  s.n_diverged = 1;
  p.estimators.push_back({"proposed", s});
  res.points.push_back(p);

  std::ostringstream sweep;
  write_sweep_csv(sweep, res);
  std::istringstream lines(sweep.str());
  std::string header, position, velocity, offset;
  std::getline(lines, header);
  std::getline(lines, position);
  std::getline(lines, velocity);
  std::getline(lines, offset);
  EXPECT_EQ(header, "sweep_value,estimator,block,mse,bias_norm,crlb,n_success,n_diverged");
  EXPECT_EQ(position, "-30,proposed,position,0.5,5,0.30000000000000004,2,1");
  EXPECT_EQ(velocity.substr(0, 26), "-30,proposed,velocity,2,0,");
  EXPECT_EQ(offset, "-30,proposed,offset,0,1,0.5,2,1");

  std::ostringstream cdf;
  write_cdf_csv(cdf, res);
  EXPECT_EQ(cdf.str(),
            "sweep_value,estimator,squared_error,cdf\n"
            "-30,proposed,0.25,0.5\n"
            "-30,proposed,0.75,1\n");
}

TEST(ReportJson, FlatEstimateRecord) {
  EstimateReport r;
  r.estimator = "mle";
  r.state = seqtoa::testing::moving_target();
  r.iterations = 4;
  r.converged = true;
  r.wls_covariance = Eigen::MatrixXd::Identity(2, 2);
  const Json j = to_json(r);
  EXPECT_EQ(j["estimator"], "mle");
  EXPECT_EQ(j["x"], 40.0);
  EXPECT_EQ(j["omega"], 3000.0);
  EXPECT_EQ(j["iterations"], 4);
  EXPECT_EQ(j["converged"], true);
  EXPECT_EQ(j["wls_covariance"], Json({1.0, 0.0, 0.0, 1.0}));
}

TEST(ReportJson, CrlbDiagonalAndMatrix) {
  CrlbResult c;
  c.target_bound = Matrix6::Identity() * 2.0;
  c.target_bound(0, 1) = c.target_bound(1, 0) = 0.5;
  const Json j = to_json(c);
  EXPECT_EQ(j["diagonal"].size(), 6u);
  EXPECT_EQ(j["diagonal"][3], 2.0);
  EXPECT_EQ(j["bound"][0][1], 0.5);
  EXPECT_EQ(j["position_trace"], 4.0);
}
