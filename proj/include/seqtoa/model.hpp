#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqtoa {

// Signal propagation speed. Every time-like quantity except slot times is
// stored multiplied by this constant, so offsets are meters and skews m/s.
inline constexpr double kSpeedOfLight = 299'792'458.0;

// Clock skew sanity bound, range-equivalent (100 ppm).
inline constexpr double kMaxSkew = kSpeedOfLight * 100e-6;

using Vec2 = Eigen::Vector2d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector9 = Eigen::Matrix<double, 9, 1>;
using Matrix9 = Eigen::Matrix<double, 9, 9>;

// Variance quoted in dB relative to 1 m^2.
inline double db_to_variance(double db) { return std::pow(10.0, db / 10.0); }
inline double variance_to_db(double var) { return 10.0 * std::log10(var); }

inline double seconds_to_range(double seconds) { return seconds * kSpeedOfLight; }
inline double ppm_to_range_rate(double ppm) { return ppm * 1e-6 * kSpeedOfLight; }

// Target state at the start of a TDMA frame. Layout of to_vector():
// [x, y, vx, vy, offset, skew].
struct TargetState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double offset = 0.0;  // m
  double skew = 0.0;    // m/s

  Vector6 to_vector() const;
  static TargetState from_vector(const Vector6& x);
  bool is_finite() const;
};

struct AgentTruth {
  Vec2 position = Vec2::Zero();  // position at the agent's slot
  double offset = 0.0;           // clock offset at the agent's slot, m
  double slot_time = 0.0;        // s, relative to the first broadcast
};

struct AgentBroadcast {
  Vec2 position = Vec2::Zero();
  double offset = 0.0;
};

// C_tau is diagonal and stored as its diagonal. C_beta is the full 3M x 3M
// covariance of the stacked agent errors [dx_1, dy_1, dT_1, dx_2, ...].
struct NoiseSpec {
  Eigen::VectorXd toa_var;
  Eigen::MatrixXd agent_cov;

  // C_beta = diag(s_1^2 I_3, ..., s_M^2 I_3).
  static NoiseSpec block_diagonal(const Eigen::VectorXd& toa_var,
                                  const Eigen::VectorXd& agent_var);
  static NoiseSpec uniform(int num_agents, double toa_var, double agent_var);

  int num_agents() const { return static_cast<int>(toa_var.size()); }
  Eigen::MatrixXd toa_cov() const { return toa_var.asDiagonal(); }
  // Trace of the 2x2 position block of each agent's 3x3 block.
  std::vector<double> agent_position_traces() const;
  NoiseSpec scaled(double factor) const;
};

struct Scenario {
  std::vector<AgentTruth> agents;
  TargetState target;
  NoiseSpec noise;

  int num_agents() const { return static_cast<int>(agents.size()); }
};

struct FrameRecord {
  double slot_time = 0.0;  // s
  double toa = 0.0;        // noisy TOA, m
  AgentBroadcast broadcast;
};

struct ObservedFrame {
  std::vector<FrameRecord> records;
  NoiseSpec noise;

  int num_agents() const { return static_cast<int>(records.size()); }
};

// Noise-free TOA of one broadcast.
double forward_toa(const TargetState& target, const AgentTruth& agent);

// Draws TOA noise and agent errors. Identical (scenario, seed) pairs give
// bit-identical frames. Throws std::invalid_argument when C_beta has a
// negative eigenvalue or C_tau a negative entry.
ObservedFrame simulate_frame(const Scenario& scenario, std::uint64_t seed);

// Frame with exact TOAs and exact broadcasts; the noise spec is carried along.
ObservedFrame noiseless_frame(const Scenario& scenario);

enum class Severity { kWarning, kError };

struct Diagnostic {
  Severity severity;
  std::string code;
  std::string message;
};

std::vector<Diagnostic> validate_scenario(const Scenario& scenario);
bool has_errors(const std::vector<Diagnostic>& diagnostics);

// Number of unknowns of the linearized moving-target system.
inline constexpr int kNumLinearUnknowns = 9;

}  // namespace seqtoa
