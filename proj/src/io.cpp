#include "seqtoa/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace seqtoa::io {

SchemaError::SchemaError(std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : field + ": " + message),
      field_(std::move(field)) {}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(join(path, key), "missing required field");
  return *it;
}

double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected a finite number");
  return v;
}

int as_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw SchemaError(path, "integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t as_seed(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw SchemaError(path, "expected a non-negative integer");
}

bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], index(path, i)));
  return out;
}

Vec2 as_vec2(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [x, y]");
  return {as_number(j[0], index(path, 0)), as_number(j[1], index(path, 1))};
}

Interval as_interval(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [lo, hi]");
  Interval iv{as_number(j[0], index(path, 0)), as_number(j[1], index(path, 1))};
  if (!(iv.lo <= iv.hi)) throw SchemaError(path, "lo must not exceed hi");
  return iv;
}

Json vec2(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Json matrix(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd as_matrix(const Json& j, const std::string& path, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw SchemaError(path, "expected " + std::to_string(n) + " rows");
  }
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::vector<double> row = as_numbers(j[r], index(path, r));
    if (static_cast<Eigen::Index>(row.size()) != n) {
      throw SchemaError(index(path, r), "expected " + std::to_string(n) + " columns");
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row[c];
  }
  return m;
}

template <typename T, typename F>
T optional_field(const Json& obj, const std::string& key, const std::string& path, T fallback,
                 F convert) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return convert(*it, join(path, key));
}

bool same_state(const TargetState& a, const TargetState& b) {
  return a.position == b.position && a.velocity == b.velocity && a.offset == b.offset &&
         a.skew == b.skew;
}

}  // namespace

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.name != b.name || a.version != b.version || !(a.noise == b.noise)) return false;
  if (!same_state(a.target, b.target) || a.agents.size() != b.agents.size()) return false;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    const AgentTruth& x = a.agents[i];
    const AgentTruth& y = b.agents[i];
    if (x.position != y.position || x.offset != y.offset || x.slot_time != y.slot_time) {
      return false;
    }
  }
  return true;
}

Json parse_document(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
}

Json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

Json to_json(const TargetState& x) {
  return {{"p", vec2(x.position)}, {"v", vec2(x.velocity)}, {"T", x.offset}, {"omega", x.skew}};
}

TargetState target_from_json(const Json& j, const std::string& path) {
  TargetState x;
  x.position = as_vec2(require(j, "p", path), join(path, "p"));
  x.velocity = as_vec2(require(j, "v", path), join(path, "v"));
  x.offset = as_number(require(j, "T", path), join(path, "T"));
  x.skew = as_number(require(j, "omega", path), join(path, "omega"));
  return x;
}

Scenario ScenarioConfig::to_scenario() const {
  Scenario scn;
  scn.agents = agents;
  scn.target = target;
  const int m = static_cast<int>(agents.size());
  Eigen::VectorXd agent_var(m);
  if (const auto* list = std::get_if<std::vector<double>>(&noise.agent_sigma_sq_db)) {
    for (int i = 0; i < m; ++i) agent_var(i) = db_to_variance((*list)[i]);
  } else {
    const auto& s = std::get<AgentSigmaSampling>(noise.agent_sigma_sq_db);
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> jitter(-s.half_width_db, s.half_width_db);
    for (int i = 0; i < m; ++i) agent_var(i) = db_to_variance(s.center_db + jitter(rng));
  }
  scn.noise = NoiseSpec::block_diagonal(
      Eigen::VectorXd::Constant(m, db_to_variance(noise.sigma_tau_sq_db)), agent_var);
  return scn;
}

ScenarioConfig scenario_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("", "scenario must be a JSON object");
  ScenarioConfig cfg;
  cfg.name = optional_field(doc, "name", "", std::string{}, as_string);
  cfg.version = optional_field(doc, "version", "", 1, as_int);

  const Json& agents = require(doc, "agents", "");
  if (!agents.is_array() || agents.empty()) throw SchemaError("agents", "expected a non-empty array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = index("agents", i);
    AgentTruth a;
    a.position = as_vec2(require(agents[i], "p", path), join(path, "p"));
    a.offset = as_number(require(agents[i], "T", path), join(path, "T"));
    a.slot_time = as_number(require(agents[i], "t", path), join(path, "t"));
    cfg.agents.push_back(a);
  }
  cfg.target = target_from_json(require(doc, "target", ""), "target");

  const Json& noise = require(doc, "noise", "");
  cfg.noise.sigma_tau_sq_db =
      as_number(require(noise, "sigma_tau_sq_db", "noise"), "noise.sigma_tau_sq_db");
  const Json& agent = require(noise, "agent_sigma_sq_db", "noise");
  const std::string agent_path = "noise.agent_sigma_sq_db";
  if (agent.is_array()) {
    std::vector<double> list = as_numbers(agent, agent_path);
    if (list.size() != cfg.agents.size()) {
      throw SchemaError(agent_path, "expected one entry per agent (" +
                                        std::to_string(cfg.agents.size()) + ")");
    }
    cfg.noise.agent_sigma_sq_db = std::move(list);
  } else if (agent.is_object()) {
    AgentSigmaSampling s;
    s.center_db = as_number(require(agent, "center_db", agent_path), join(agent_path, "center_db"));
    s.half_width_db = optional_field(agent, "half_width_db", agent_path, 5.0, as_number);
    if (s.half_width_db < 0.0) {
      throw SchemaError(join(agent_path, "half_width_db"), "must be non-negative");
    }
    s.seed = optional_field(agent, "seed", agent_path, std::uint64_t{0}, as_seed);
    cfg.noise.agent_sigma_sq_db = s;
  } else {
    throw SchemaError(agent_path, "expected an array of dB values or a sampling object");
  }
  return cfg;
}

Json to_json(const ScenarioConfig& cfg) {
  Json agents = Json::array();
  for (const AgentTruth& a : cfg.agents) {
    agents.push_back({{"p", vec2(a.position)}, {"T", a.offset}, {"t", a.slot_time}});
  }
  Json agent_noise;
  if (const auto* list = std::get_if<std::vector<double>>(&cfg.noise.agent_sigma_sq_db)) {
    agent_noise = *list;
  } else {
    const auto& s = std::get<AgentSigmaSampling>(cfg.noise.agent_sigma_sq_db);
    agent_noise = {{"center_db", s.center_db}, {"half_width_db", s.half_width_db}, {"seed", s.seed}};
  }
  return {{"name", cfg.name},
          {"version", cfg.version},
          {"agents", std::move(agents)},
          {"target", to_json(cfg.target)},
          {"noise", {{"sigma_tau_sq_db", cfg.noise.sigma_tau_sq_db},
                     {"agent_sigma_sq_db", std::move(agent_noise)}}}};
}

namespace {

// Per-agent variance when C_beta is diag(s_1^2 I_3, ...), otherwise nullopt.
std::optional<Eigen::VectorXd> block_variances(const NoiseSpec& noise) {
  const int m = noise.num_agents();
  if (noise.agent_cov.rows() != 3 * m) return std::nullopt;
  Eigen::VectorXd var(m);
  for (int i = 0; i < m; ++i) {
    var(i) = noise.agent_cov(3 * i, 3 * i);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3 * m, 3);
    expected.block(3 * i, 0, 3, 3) = var(i) * Eigen::Matrix3d::Identity();
    if (noise.agent_cov.middleCols(3 * i, 3) != expected) return std::nullopt;
  }
  return var;
}

}  // namespace

FrameDocument frame_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("", "frame must be a JSON object");
  FrameDocument out;
  const Json& records = require(doc, "records", "");
  if (!records.is_array() || records.empty()) {
    throw SchemaError("records", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string path = index("records", i);
    FrameRecord r;
    r.slot_time = as_number(require(records[i], "t", path), join(path, "t"));
    r.toa = as_number(require(records[i], "tau", path), join(path, "tau"));
    r.broadcast.position = as_vec2(require(records[i], "p_hat", path), join(path, "p_hat"));
    r.broadcast.offset = as_number(require(records[i], "T_hat", path), join(path, "T_hat"));
    out.frame.records.push_back(r);
  }
  const auto m = static_cast<Eigen::Index>(records.size());

  const Json& noise = require(doc, "noise", "");
  const std::vector<double> toa_var = as_numbers(require(noise, "toa_var", "noise"), "noise.toa_var");
  if (static_cast<Eigen::Index>(toa_var.size()) != m) {
    throw SchemaError("noise.toa_var", "expected one entry per record (" + std::to_string(m) + ")");
  }
  for (std::size_t i = 0; i < toa_var.size(); ++i) {
    if (toa_var[i] < 0.0) throw SchemaError(index("noise.toa_var", i), "variance must be >= 0");
  }
  const Eigen::VectorXd tv = Eigen::Map<const Eigen::VectorXd>(toa_var.data(), m);

  const bool has_var = noise.contains("agent_var");
  const bool has_cov = noise.contains("agent_cov");
  if (has_var == has_cov) {
    throw SchemaError("noise", "exactly one of agent_var or agent_cov is required");
  }
  if (has_var) {
    const std::vector<double> av = as_numbers(noise["agent_var"], "noise.agent_var");
    if (static_cast<Eigen::Index>(av.size()) != m) {
      throw SchemaError("noise.agent_var", "expected one entry per record (" + std::to_string(m) + ")");
    }
    for (std::size_t i = 0; i < av.size(); ++i) {
      if (av[i] < 0.0) throw SchemaError(index("noise.agent_var", i), "variance must be >= 0");
    }
    out.frame.noise = NoiseSpec::block_diagonal(tv, Eigen::Map<const Eigen::VectorXd>(av.data(), m));
  } else {
    out.frame.noise.toa_var = tv;
    out.frame.noise.agent_cov = as_matrix(noise["agent_cov"], "noise.agent_cov", 3 * m);
  }
  if (doc.contains("truth")) out.truth = target_from_json(doc["truth"], "truth");
  return out;
}

Json to_json(const ObservedFrame& frame, const std::optional<TargetState>& truth) {
  Json records = Json::array();
  for (const FrameRecord& r : frame.records) {
    records.push_back({{"t", r.slot_time},
                       {"tau", r.toa},
                       {"p_hat", vec2(r.broadcast.position)},
                       {"T_hat", r.broadcast.offset}});
  }
  Json noise = {{"toa_var", std::vector<double>(frame.noise.toa_var.data(),
                                                frame.noise.toa_var.data() + frame.noise.toa_var.size())}};
  if (auto var = block_variances(frame.noise)) {
    noise["agent_var"] = std::vector<double>(var->data(), var->data() + var->size());
  } else {
    noise["agent_cov"] = matrix(frame.noise.agent_cov);
  }
  Json doc = {{"records", std::move(records)}, {"noise", std::move(noise)}};
  if (truth) doc["truth"] = to_json(*truth);
  return doc;
}

Json to_json(const EstimateReport& report) {
  const Eigen::MatrixXd& c = report.wls_covariance;
  std::vector<double> cov;  // row-major
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) cov.push_back(c(r, k));
  }
  return {{"estimator", report.estimator},
          {"x", report.state.position.x()},
          {"y", report.state.position.y()},
          {"vx", report.state.velocity.x()},
          {"vy", report.state.velocity.y()},
          {"T", report.state.offset},
          {"omega", report.state.skew},
          {"iterations", report.iterations},
          {"converged", report.converged},
          {"diverged", report.diverged},
          {"cond_estimate", report.cond_estimate},
          {"wls_covariance_dim", c.rows()},
          {"wls_covariance", std::move(cov)}};
}

Json to_json(const CrlbResult& crlb) {
  const Matrix6& b = crlb.target_bound;
  Json diag = Json::array();
  for (int i = 0; i < 6; ++i) diag.push_back(b(i, i));
  return {{"order", {"x", "y", "vx", "vy", "T", "omega"}},
          {"diagonal", std::move(diag)},
          {"position_trace", b(0, 0) + b(1, 1)},
          {"velocity_trace", b(2, 2) + b(3, 3)},
          {"bound", matrix(b)}};
}

namespace {

Json bounds_json(const ScenarioBounds& b) {
  auto iv = [](const Interval& i) { return Json::array({i.lo, i.hi}); };
  return {{"num_agents", b.num_agents},
          {"slot_interval", b.slot_interval},
          {"agent_coord", iv(b.agent_coord)},
          {"target_coord", iv(b.target_coord)},
          {"velocity", iv(b.velocity)},
          {"agent_offset_ns", iv(b.agent_offset_ns)},
          {"target_offset_ns", iv(b.target_offset_ns)},
          {"skew_ppm", iv(b.skew_ppm)},
          {"sigma_tau_sq_db", b.sigma_tau_sq_db},
          {"sigma_s_sq_db", b.sigma_s_sq_db},
          {"agent_sigma_half_width_db", b.agent_sigma_half_width_db}};
}

ScenarioBounds bounds_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  ScenarioBounds b;
  b.num_agents = optional_field(j, "num_agents", path, b.num_agents, as_int);
  b.slot_interval = optional_field(j, "slot_interval", path, b.slot_interval, as_number);
  b.agent_coord = optional_field(j, "agent_coord", path, b.agent_coord, as_interval);
  b.target_coord = optional_field(j, "target_coord", path, b.target_coord, as_interval);
  b.velocity = optional_field(j, "velocity", path, b.velocity, as_interval);
  b.agent_offset_ns = optional_field(j, "agent_offset_ns", path, b.agent_offset_ns, as_interval);
  b.target_offset_ns = optional_field(j, "target_offset_ns", path, b.target_offset_ns, as_interval);
  b.skew_ppm = optional_field(j, "skew_ppm", path, b.skew_ppm, as_interval);
  b.sigma_tau_sq_db = optional_field(j, "sigma_tau_sq_db", path, b.sigma_tau_sq_db, as_number);
  b.sigma_s_sq_db = optional_field(j, "sigma_s_sq_db", path, b.sigma_s_sq_db, as_number);
  b.agent_sigma_half_width_db = optional_field(j, "agent_sigma_half_width_db", path,
                                               b.agent_sigma_half_width_db, as_number);
  if (b.num_agents < 1) throw SchemaError(join(path, "num_agents"), "must be >= 1");
  if (!(b.slot_interval > 0.0)) throw SchemaError(join(path, "slot_interval"), "must be positive");
  if (b.agent_sigma_half_width_db < 0.0) {
    throw SchemaError(join(path, "agent_sigma_half_width_db"), "must be non-negative");
  }
  return b;
}

}  // namespace

ExperimentSpec experiment_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("", "experiment spec must be a JSON object");
  ExperimentSpec spec;
  spec.name = optional_field(doc, "name", "", spec.name, as_string);
  if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos) {
    throw SchemaError("name", "must be a non-empty file-name-safe string");
  }

  const std::string scheme = as_string(require(doc, "scheme", ""), "scheme");
  auto parsed = scheme_from_string(scheme);
  if (!parsed) {
    throw SchemaError("scheme", "unknown scheme '" + scheme +
                                    "' (expected noise_sweep, ltco_sweep or random_topology)");
  }
  spec.scheme = *parsed;

  spec.n_trials = as_int(require(doc, "n_trials", ""), "n_trials");
  if (spec.n_trials < 1) throw SchemaError("n_trials", "must be >= 1");
  spec.base_seed = optional_field(doc, "base_seed", "", spec.base_seed, as_seed);
  spec.sweep_values = as_numbers(require(doc, "sweep_values", ""), "sweep_values");
  if (spec.sweep_values.empty()) throw SchemaError("sweep_values", "must be non-empty");

  if (doc.contains("estimators")) {
    const Json& e = doc["estimators"];
    if (!e.is_array() || e.empty()) throw SchemaError("estimators", "expected a non-empty array");
    spec.estimators.clear();
    for (std::size_t i = 0; i < e.size(); ++i) {
      spec.estimators.push_back(as_string(e[i], index("estimators", i)));
      const auto& known = known_estimators();
      if (std::find(known.begin(), known.end(), spec.estimators.back()) == known.end()) {
        throw SchemaError(index("estimators", i), "unknown estimator '" + spec.estimators.back() + "'");
      }
    }
  }
  spec.mle_init_sigma = optional_field(doc, "mle_init_sigma", "", spec.mle_init_sigma, as_number);
  if (spec.mle_init_sigma < 0.0) throw SchemaError("mle_init_sigma", "must be non-negative");
  spec.exclude_diverged =
      optional_field(doc, "exclude_diverged", "", spec.exclude_diverged, as_bool);
  spec.analytic_cov = optional_field(doc, "analytic_cov", "", spec.analytic_cov, as_bool);
  if (doc.contains("bounds")) spec.bounds = bounds_from_json(doc["bounds"], "bounds");

  if (doc.contains("topology")) {
    const Json& t = doc["topology"];
    const std::string kind = as_string(require(t, "kind", "topology"), "topology.kind");
    if (kind == "random") {
      spec.random_topology = true;
    } else if (kind == "fixed") {
      spec.random_topology = false;
      const Json& agents = require(t, "agents", "topology");
      if (!agents.is_array() || agents.empty()) {
        throw SchemaError("topology.agents", "expected a non-empty array of [x, y]");
      }
      spec.topology.agents.clear();
      for (std::size_t i = 0; i < agents.size(); ++i) {
        spec.topology.agents.push_back(as_vec2(agents[i], index("topology.agents", i)));
      }
      spec.topology.target = as_vec2(require(t, "target", "topology"), "topology.target");
      spec.topology.velocity = as_vec2(require(t, "velocity", "topology"), "topology.velocity");
    } else {
      throw SchemaError("topology.kind", "expected 'fixed' or 'random'");
    }
  }
  if (const std::string err = validate_experiment(spec); !err.empty()) throw SchemaError("", err);
  return spec;
}

Json to_json(const ExperimentSpec& spec) {
  Json topology;
  if (spec.random_topology) {
    topology = {{"kind", "random"}};
  } else {
    Json agents = Json::array();
    for (const Vec2& a : spec.topology.agents) agents.push_back(vec2(a));
    topology = {{"kind", "fixed"},
                {"agents", std::move(agents)},
                {"target", vec2(spec.topology.target)},
                {"velocity", vec2(spec.topology.velocity)}};
  }
  return {{"name", spec.name},
          {"scheme", to_string(spec.scheme)},
          {"n_trials", spec.n_trials},
          {"base_seed", spec.base_seed},
          {"sweep_values", spec.sweep_values},
          {"estimators", spec.estimators},
          {"mle_init_sigma", spec.mle_init_sigma},
          {"exclude_diverged", spec.exclude_diverged},
          {"analytic_cov", spec.analytic_cov},
          {"topology", std::move(topology)},
          {"bounds", bounds_json(spec.bounds)}};
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw SchemaError("", "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw SchemaError(key, "empty path component in override");
    if (!node->is_object()) throw SchemaError(key, "override path does not name an object field");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_sweep_csv(std::ostream& os, const ExperimentResult& result) {
  os << "sweep_value,estimator,block,mse,bias_norm,crlb,n_success,n_diverged\n";
  struct Block {
    const char* name;
    int offset;
    int size;
  };
  constexpr Block blocks[] = {{"position", 0, 2}, {"velocity", 2, 2}, {"offset", 4, 1}, {"skew", 5, 1}};
  for (const SweepPoint& p : result.points) {
    for (const EstimatorStats& e : p.estimators) {
      const TrialStats& s = e.stats;
      const double mse[] = {s.mse_position, s.mse_velocity, s.mse_offset, s.mse_skew};
      for (int b = 0; b < 4; ++b) {
        const Block& blk = blocks[b];
        const double bias = s.bias.segment(blk.offset, blk.size).norm();
        const double crlb = s.crlb_mean.diagonal().segment(blk.offset, blk.size).sum();
        os << format_double(p.sweep_value) << ',' << e.estimator << ',' << blk.name << ','
           << format_double(mse[b]) << ',' << format_double(bias) << ',' << format_double(crlb)
           << ',' << s.n_success << ',' << s.n_diverged << '\n';
      }
    }
  }
}

void write_cdf_csv(std::ostream& os, const ExperimentResult& result) {
  os << "sweep_value,estimator,squared_error,cdf\n";
  for (const SweepPoint& p : result.points) {
    for (const EstimatorStats& e : p.estimators) {
      const auto& samples = e.stats.cdf_samples;
      const double n = static_cast<double>(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        os << format_double(p.sweep_value) << ',' << e.estimator << ','
           << format_double(samples[i]) << ',' << format_double((i + 1) / n) << '\n';
      }
    }
  }
}

}  // namespace seqtoa::io
