#include "seqtoa/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "seqtoa/analysis.hpp"
#include "seqtoa/baselines.hpp"
#include "seqtoa/error.hpp"
#include "seqtoa/estimator.hpp"

namespace seqtoa {

FixedTopology canonical_fixed_topology() {
  FixedTopology topo;
  topo.agents = {
      {0.8, 1.5},  {12.1, 2.7},  {26.3, 0.6},  {36.9, 2.2},  {49.2, 1.1},
      {1.9, 28.4}, {13.4, 29.3}, {24.2, 27.5}, {38.1, 29.6}, {48.5, 27.9},
  };
  topo.target = {40.0, 15.0};
  topo.velocity = {-5.0, 0.0};
  return topo;
}

namespace {

double uniform(std::mt19937_64& rng, const Interval& iv) {
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

struct MotionDraw {
  std::vector<Vec2> agent_positions;
  std::vector<Vec2> agent_velocities;
  Vec2 target_position;
  Vec2 target_velocity;
};

// Clocks and per-agent variances, then assembly of the per-slot snapshot.
Scenario assemble(const MotionDraw& motion, const ScenarioBounds& bounds, std::mt19937_64& rng) {
  const int m = static_cast<int>(motion.agent_positions.size());
  Scenario scn;
  scn.target.position = motion.target_position;
  scn.target.velocity = motion.target_velocity;
  scn.target.offset = seconds_to_range(uniform(rng, bounds.target_offset_ns) * 1e-9);
  scn.target.skew = ppm_to_range_rate(uniform(rng, bounds.skew_ppm));

  const Interval width{-bounds.agent_sigma_half_width_db, bounds.agent_sigma_half_width_db};
  Eigen::VectorXd agent_var(m);
  scn.agents.resize(m);
  for (int i = 0; i < m; ++i) {
    const double offset0 = seconds_to_range(uniform(rng, bounds.agent_offset_ns) * 1e-9);
    const double skew = ppm_to_range_rate(uniform(rng, bounds.skew_ppm));
    agent_var(i) = db_to_variance(bounds.sigma_s_sq_db + uniform(rng, width));
    const double t = i * bounds.slot_interval;
    scn.agents[i].slot_time = t;
    scn.agents[i].position = motion.agent_positions[i] + motion.agent_velocities[i] * t;
    scn.agents[i].offset = offset0 + skew * t;
  }
  scn.noise = NoiseSpec::block_diagonal(
      Eigen::VectorXd::Constant(m, db_to_variance(bounds.sigma_tau_sq_db)), agent_var);
  return scn;
}

}  // namespace

Scenario sample_random_topology(const ScenarioBounds& bounds, std::mt19937_64& rng) {
  MotionDraw motion;
  for (int i = 0; i < bounds.num_agents; ++i) {
    const double x = uniform(rng, bounds.agent_coord);
    const double y = uniform(rng, bounds.agent_coord);
    const double vx = uniform(rng, bounds.velocity);
    const double vy = uniform(rng, bounds.velocity);
    motion.agent_positions.emplace_back(x, y);
    motion.agent_velocities.emplace_back(vx, vy);
  }
  const double x = uniform(rng, bounds.target_coord);
  const double y = uniform(rng, bounds.target_coord);
  const double vx = uniform(rng, bounds.velocity);
  const double vy = uniform(rng, bounds.velocity);
  motion.target_position = {x, y};
  motion.target_velocity = {vx, vy};
  return assemble(motion, bounds, rng);
}

Scenario sample_fixed_topology(const FixedTopology& topology, const ScenarioBounds& bounds,
                               std::mt19937_64& rng) {
  MotionDraw motion;
  motion.agent_positions = topology.agents;
  motion.agent_velocities.assign(topology.agents.size(), topology.velocity);
  motion.target_position = topology.target;
  motion.target_velocity = topology.velocity;
  return assemble(motion, bounds, rng);
}

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kNoiseSweep: return "noise_sweep";
    case Scheme::kLtcoSweep: return "ltco_sweep";
    case Scheme::kRandomTopology: return "random_topology";
  }
  return "unknown";
}

std::optional<Scheme> scheme_from_string(const std::string& name) {
  for (Scheme s : {Scheme::kNoiseSweep, Scheme::kLtcoSweep, Scheme::kRandomTopology}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

std::string validate_experiment(const ExperimentSpec& spec) {
  if (spec.n_trials < 1) return "n_trials must be >= 1";
  if (spec.sweep_values.empty()) return "sweep_values must be non-empty";
  if (spec.estimators.empty()) return "estimators must be non-empty";
  for (const auto& id : spec.estimators) {
    const auto& known = known_estimators();
    if (std::find(known.begin(), known.end(), id) == known.end()) {
      return "unknown estimator '" + id + "'";
    }
  }
  const ScenarioBounds& b = spec.bounds;
  for (const Interval* iv : {&b.agent_coord, &b.target_coord, &b.velocity, &b.agent_offset_ns,
                             &b.target_offset_ns, &b.skew_ppm}) {
    if (!(iv->lo <= iv->hi)) return "bounds must satisfy lo <= hi";
  }
  if (!(b.slot_interval > 0.0)) return "slot_interval must be positive";
  if (!spec.random_topology && spec.topology.agents.empty()) return "fixed topology has no agents";
  if (spec.random_topology && b.num_agents < 1) return "num_agents must be >= 1";
  if (!(spec.mle_init_sigma >= 0.0)) return "mle_init_sigma must be non-negative";
  return {};
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return base_seed ^ static_cast<std::uint64_t>(trial);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

enum StreamId : std::uint64_t { kScenarioStream = 1, kFrameStream = 2, kMleStream = 3 };

}  // namespace

Scenario materialize_trial(const ExperimentSpec& spec, double sweep_value, int trial) {
  ScenarioBounds bounds = spec.bounds;
  if (spec.scheme != Scheme::kLtcoSweep) bounds.sigma_s_sq_db = sweep_value;
  std::mt19937_64 rng(stream_seed(trial_seed(spec.base_seed, trial), kScenarioStream));
  Scenario scn = spec.random_topology ? sample_random_topology(bounds, rng)
                                      : sample_fixed_topology(spec.topology, bounds, rng);
  if (spec.scheme == Scheme::kLtcoSweep) scn.target.offset = sweep_value;
  return scn;
}

const TrialStats& SweepPoint::at(const std::string& estimator) const {
  for (const auto& e : estimators) {
    if (e.estimator == estimator) return e.stats;
  }
  throw std::out_of_range("no statistics for estimator " + estimator);
}

int default_thread_count() {
  if (const char* env = std::getenv("SEQTOA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

enum class Outcome { kSuccess, kDiverged, kFailed };

struct EstimatorOutcome {
  Outcome outcome = Outcome::kFailed;
  Vector6 error = Vector6::Zero();
};

struct TrialRecord {
  std::vector<EstimatorOutcome> estimators;
  std::optional<Matrix6> crlb;
  std::optional<Matrix6> analytic;
};

TrialRecord run_one(const ExperimentSpec& spec, double sweep_value, int trial) {
  TrialRecord rec;
  const Scenario scn = materialize_trial(spec, sweep_value, trial);
  const std::uint64_t seed = trial_seed(spec.base_seed, trial);
  const Vector6 truth = scn.target.to_vector();

  ObservedFrame frame;
  try {
    frame = simulate_frame(scn, stream_seed(seed, kFrameStream));
  } catch (const std::exception&) {
    rec.estimators.assign(spec.estimators.size(), EstimatorOutcome{});
    return rec;
  }
  try {
    rec.crlb = crlb_target(scn).target_bound;
  } catch (const EstimationError&) {
  }
  if (spec.analytic_cov) {
    try {
      rec.analytic = analytic_cov(scn);
    } catch (const EstimationError&) {
    }
  }

  for (const std::string& id : spec.estimators) {
    EstimatorOutcome out;
    try {
      if (id == "proposed") {
        out.error = estimate(frame).state.to_vector() - truth;
        out.outcome = Outcome::kSuccess;
      } else if (id == "tswls_static") {
        const StaticTswlsResult r = tswls_static_estimate(frame);
        if (r.ok) {
          out.error = r.as_state().to_vector() - truth;
          out.outcome = Outcome::kSuccess;
        }
      } else if (id == "mle") {
        std::mt19937_64 rng(stream_seed(seed, kMleStream));
        MleConfig cfg;
        cfg.init_perturbation_sigma = spec.mle_init_sigma;
        cfg.init = perturbed_init(scn.target, cfg.init_perturbation_sigma, rng);
        const EstimateReport r = mle_estimate(frame, cfg);
        out.error = r.state.to_vector() - truth;
        out.outcome = r.diverged ? Outcome::kDiverged : Outcome::kSuccess;
      }
    } catch (const EstimationError&) {
      out.outcome = Outcome::kFailed;
    }
    if (out.outcome != Outcome::kFailed && !out.error.allFinite()) out.outcome = Outcome::kFailed;
    rec.estimators.push_back(out);
  }
  return rec;
}

TrialStats reduce(const ExperimentSpec& spec, const std::vector<TrialRecord>& records,
                  std::size_t estimator_index) {
  TrialStats st;
  std::vector<Vector6> errors;
  for (const TrialRecord& rec : records) {
    const EstimatorOutcome& out = rec.estimators[estimator_index];
    if (out.outcome == Outcome::kFailed) {
      ++st.n_failed;
      continue;
    }
    if (out.outcome == Outcome::kDiverged) {
      ++st.n_diverged;
      if (spec.exclude_diverged) continue;
    }
    errors.push_back(out.error);
  }
  st.n_success = static_cast<int>(errors.size());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (errors.empty()) {
    st.mse_position = st.mse_velocity = st.mse_offset = st.mse_skew = nan;
    st.bias.setConstant(nan);
    st.error_cov.setConstant(nan);
  } else {
    Vector6 sum_sq = Vector6::Zero();
    for (const Vector6& e : errors) {
      st.bias += e;
      sum_sq += e.cwiseAbs2();
      st.cdf_samples.push_back(e.head<2>().squaredNorm());
    }
    const double n = static_cast<double>(errors.size());
    st.bias /= n;
    sum_sq /= n;
    st.mse_position = sum_sq(0) + sum_sq(1);
    st.mse_velocity = sum_sq(2) + sum_sq(3);
    st.mse_offset = sum_sq(4);
    st.mse_skew = sum_sq(5);
    if (errors.size() > 1) {
      for (const Vector6& e : errors) {
        const Vector6 c = e - st.bias;
        st.error_cov += c * c.transpose();
      }
      st.error_cov /= n - 1.0;
    }
    std::sort(st.cdf_samples.begin(), st.cdf_samples.end());
  }

  int n_crlb = 0;
  int n_analytic = 0;
  Matrix6 analytic_sum = Matrix6::Zero();
  for (const TrialRecord& rec : records) {
    if (rec.crlb) {
      st.crlb_mean += *rec.crlb;
      ++n_crlb;
    }
    if (rec.analytic) {
      analytic_sum += *rec.analytic;
      ++n_analytic;
    }
  }
  if (n_crlb > 0) {
    st.crlb_mean /= n_crlb;
  } else {
    st.crlb_mean.setConstant(nan);
  }
  st.crlb_trace_position = st.crlb_mean(0, 0) + st.crlb_mean(1, 1);
  if (n_analytic > 0 && spec.estimators[estimator_index] == "proposed") {
    st.analytic_cov_mean = analytic_sum / n_analytic;
  }
  return st;
}

}  // namespace

ExperimentResult run_trials(const ExperimentSpec& spec, int threads) {
  if (const std::string err = validate_experiment(spec); !err.empty()) {
    throw std::invalid_argument("invalid experiment spec: " + err);
  }
  if (threads <= 0) threads = default_thread_count();
  threads = std::min(threads, spec.n_trials);

  ExperimentResult result;
  for (double sweep_value : spec.sweep_values) {
    std::vector<TrialRecord> records(spec.n_trials);
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next++; i < spec.n_trials; i = next++) {
        records[i] = run_one(spec, sweep_value, i);
      }
    };
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    SweepPoint point;
    point.sweep_value = sweep_value;
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
      point.estimators.push_back({spec.estimators[e], reduce(spec, records, e)});
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

}  // namespace seqtoa
