#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "seqtoa/analysis.hpp"
#include "seqtoa/estimator.hpp"
#include "seqtoa/model.hpp"
#include "seqtoa/montecarlo.hpp"

namespace seqtoa::io {

using Json = nlohmann::ordered_json;

// Malformed document or a field that violates the schema. `field` is a
// JSON-pointer-like path such as "agents[3].p"; empty for parse errors,
// whose message carries the line and column instead.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Per-agent variances drawn uniformly in dB from
// [center_db - half_width_db, center_db + half_width_db] with a fixed seed.
struct AgentSigmaSampling {
  double center_db = -20.5;
  double half_width_db = 5.0;
  std::uint64_t seed = 0;
  bool operator==(const AgentSigmaSampling&) const = default;
};

struct NoiseConfig {
  double sigma_tau_sq_db = -30.0;
  std::variant<std::vector<double>, AgentSigmaSampling> agent_sigma_sq_db;
  bool operator==(const NoiseConfig&) const = default;
};

// Scenario file as written by hand: keeps the noise in its dB form so that
// parse -> serialize -> parse is the identity.
struct ScenarioConfig {
  std::string name;
  int version = 1;
  std::vector<AgentTruth> agents;
  TargetState target;
  NoiseConfig noise;

  Scenario to_scenario() const;
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

Json parse_document(const std::string& text);
Json read_document(const std::string& path);
void write_text(const std::string& path, const std::string& text);

ScenarioConfig scenario_from_json(const Json& doc);
Json to_json(const ScenarioConfig& cfg);

// Frames carry linear variances (m^2): "toa_var" and either "agent_var"
// (block-diagonal) or a full "agent_cov". An optional "truth" holds the
// target state the frame was simulated from.
struct FrameDocument {
  ObservedFrame frame;
  std::optional<TargetState> truth;
};

FrameDocument frame_from_json(const Json& doc);
Json to_json(const ObservedFrame& frame, const std::optional<TargetState>& truth = std::nullopt);

Json to_json(const TargetState& x);
TargetState target_from_json(const Json& j, const std::string& path);

Json to_json(const EstimateReport& report);
Json to_json(const CrlbResult& crlb);

ExperimentSpec experiment_from_json(const Json& doc);
Json to_json(const ExperimentSpec& spec);

// Applies "a.b.c=value" to the document. The value is read as JSON when it
// parses as JSON, otherwise taken as a string.
void apply_override(Json& doc, const std::string& assignment);

// Fixed-precision number formatting used by every CSV writer.
std::string format_double(double v);

void write_sweep_csv(std::ostream& os, const ExperimentResult& result);
void write_cdf_csv(std::ostream& os, const ExperimentResult& result);

}  // namespace seqtoa::io
