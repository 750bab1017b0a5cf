#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqtoa/model.hpp"

namespace seqtoa {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

// Everything random about a trial scenario except the topology itself.
// Offsets in ns and skews in ppm; converted to range-equivalent on draw.
struct ScenarioBounds {
  int num_agents = 10;
  double slot_interval = 0.05;  // s
  Interval agent_coord{0.0, 50.0};
  Interval target_coord{-50.0, 100.0};
  Interval velocity{-5.0, 5.0};
  Interval agent_offset_ns{-10.0, 10.0};
  Interval target_offset_ns{-10.0, 10.0};
  Interval skew_ppm{-20.0, 20.0};
  double sigma_tau_sq_db = -30.0;
  double sigma_s_sq_db = -20.5;
  double agent_sigma_half_width_db = 5.0;

  bool operator==(const ScenarioBounds&) const = default;
};

// Agent and target positions at the frame start and a common velocity.
struct FixedTopology {
  std::vector<Vec2> agents;
  Vec2 target = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();

  bool operator==(const FixedTopology&) const = default;
};

// Ten agents on a jittered 2 x 5 grid over [0,50] x [0,30] m, target at
// (40, 15) m, everything moving at (-5, 0) m/s. Version 1.
FixedTopology canonical_fixed_topology();

// Random positions, velocities, clocks and agent variances within `bounds`.
// Agent m broadcasts at slot m * slot_interval from its moved position, with
// its offset advanced by its own skew.
Scenario sample_random_topology(const ScenarioBounds& bounds, std::mt19937_64& rng);

// Same draws for clocks and variances, geometry from `topology`. The number
// of uniform draws is identical across sweep values so trials share random
// numbers between sweep points.
Scenario sample_fixed_topology(const FixedTopology& topology, const ScenarioBounds& bounds,
                               std::mt19937_64& rng);

enum class Scheme { kNoiseSweep, kLtcoSweep, kRandomTopology };

const char* to_string(Scheme scheme);
std::optional<Scheme> scheme_from_string(const std::string& name);

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> ids = {"proposed", "tswls_static", "mle"};
  return ids;
}

struct ExperimentSpec {
  std::string name = "experiment";
  Scheme scheme = Scheme::kNoiseSweep;
  int n_trials = 1;
  std::uint64_t base_seed = 0;
  // noise_sweep / random_topology: sigma_s^2 in dB; ltco_sweep: target
  // clock offset in range-equivalent meters.
  std::vector<double> sweep_values;
  ScenarioBounds bounds;
  bool random_topology = false;
  FixedTopology topology = canonical_fixed_topology();
  std::vector<std::string> estimators = {"proposed"};
  double mle_init_sigma = 1.0;
  bool exclude_diverged = true;
  bool analytic_cov = false;

  bool operator==(const ExperimentSpec&) const = default;
};

// Returns an empty string when valid, otherwise the first violation.
std::string validate_experiment(const ExperimentSpec& spec);

// Seed of trial i: base_seed XOR i. Independent streams of one trial are
// derived from it through splitmix64.
std::uint64_t trial_seed(std::uint64_t base_seed, int trial);
std::uint64_t stream_seed(std::uint64_t trial_seed, std::uint64_t stream);

// Scenario of one trial at one sweep point.
Scenario materialize_trial(const ExperimentSpec& spec, double sweep_value, int trial);

struct TrialStats {
  double mse_position = 0.0;
  double mse_velocity = 0.0;
  double mse_offset = 0.0;
  double mse_skew = 0.0;
  Vector6 bias = Vector6::Zero();
  Matrix6 error_cov = Matrix6::Zero();  // empirical, about the mean
  Matrix6 crlb_mean = Matrix6::Zero();
  double crlb_trace_position = 0.0;
  std::optional<Matrix6> analytic_cov_mean;
  std::vector<double> cdf_samples;  // sorted position squared errors
  int n_success = 0;
  int n_diverged = 0;
  int n_failed = 0;
};

struct EstimatorStats {
  std::string estimator;
  TrialStats stats;
};

struct SweepPoint {
  double sweep_value = 0.0;
  std::vector<EstimatorStats> estimators;  // in spec order

  const TrialStats& at(const std::string& estimator) const;
};

struct ExperimentResult {
  std::vector<SweepPoint> points;
};

// Default worker count: SEQTOA_THREADS if set, else hardware concurrency.
int default_thread_count();

// Runs every trial of every sweep point. Per-trial failures are counted,
// never thrown. Results do not depend on the thread count.
ExperimentResult run_trials(const ExperimentSpec& spec, int threads = 0);

}  // namespace seqtoa
