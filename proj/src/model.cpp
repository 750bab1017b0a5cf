#include "seqtoa/model.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

#include "seqtoa/error.hpp"

namespace seqtoa {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kUnderdetermined: return "underdetermined";
    case ErrorKind::kRankDeficient: return "rank_deficient";
    case ErrorKind::kConditioning: return "conditioning";
    case ErrorKind::kDegenerateGeometry: return "degenerate_geometry";
    case ErrorKind::kSingularGeometry: return "singular_geometry";
    case ErrorKind::kUnobservable: return "unobservable";
    case ErrorKind::kDivision: return "division";
  }
  return "unknown";
}

Vector6 TargetState::to_vector() const {
  Vector6 x;
  x << position, velocity, offset, skew;
  return x;
}

TargetState TargetState::from_vector(const Vector6& x) {
  TargetState s;
  s.position = x.segment<2>(0);
  s.velocity = x.segment<2>(2);
  s.offset = x(4);
  s.skew = x(5);
  return s;
}

bool TargetState::is_finite() const { return to_vector().allFinite(); }

NoiseSpec NoiseSpec::block_diagonal(const Eigen::VectorXd& toa_var,
                                    const Eigen::VectorXd& agent_var) {
  if (toa_var.size() != agent_var.size()) {
    throw std::invalid_argument("toa and agent variance vectors differ in length");
  }
  NoiseSpec spec;
  spec.toa_var = toa_var;
  const Eigen::Index m = agent_var.size();
  spec.agent_cov = Eigen::MatrixXd::Zero(3 * m, 3 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    spec.agent_cov.block<3, 3>(3 * i, 3 * i).diagonal().setConstant(agent_var(i));
  }
  return spec;
}

NoiseSpec NoiseSpec::uniform(int num_agents, double toa_var, double agent_var) {
  return block_diagonal(Eigen::VectorXd::Constant(num_agents, toa_var),
                        Eigen::VectorXd::Constant(num_agents, agent_var));
}

std::vector<double> NoiseSpec::agent_position_traces() const {
  std::vector<double> traces(num_agents());
  for (int m = 0; m < num_agents(); ++m) {
    traces[m] = agent_cov(3 * m, 3 * m) + agent_cov(3 * m + 1, 3 * m + 1);
  }
  return traces;
}

NoiseSpec NoiseSpec::scaled(double factor) const {
  return NoiseSpec{toa_var * factor, agent_cov * factor};
}

double forward_toa(const TargetState& target, const AgentTruth& agent) {
  const double t = agent.slot_time;
  const Vec2 moved = target.position + target.velocity * t;
  return (moved - agent.position).norm() + target.offset + target.skew * t - agent.offset;
}

namespace {

bool is_block_diagonal(const Eigen::MatrixXd& cov) {
  const Eigen::Index n = cov.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i / 3 != j / 3 && cov(i, j) != 0.0) return false;
    }
  }
  return true;
}

// Symmetric square root S with S S^T = cov. Accepts PSD input (zero
// covariance is the noiseless limit), rejects negative eigenvalues.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov) {
  if (cov.size() == 0) return cov;
  if (!(cov - cov.transpose()).isZero(1e-12 * std::max(1.0, cov.norm()))) {
    throw std::invalid_argument("agent covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw std::invalid_argument("agent covariance factorization failed");
  }
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument("agent covariance is not positive semi-definite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd agent_noise_factor(const Eigen::MatrixXd& cov) {
  if (!is_block_diagonal(cov)) return symmetric_sqrt(cov);
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  for (Eigen::Index b = 0; b < cov.rows() / 3; ++b) {
    factor.block<3, 3>(3 * b, 3 * b) = symmetric_sqrt(cov.block<3, 3>(3 * b, 3 * b));
  }
  return factor;
}

void check_dimensions(const Scenario& scenario) {
  const Eigen::Index m = scenario.num_agents();
  if (scenario.noise.toa_var.size() != m || scenario.noise.agent_cov.rows() != 3 * m ||
      scenario.noise.agent_cov.cols() != 3 * m) {
    throw std::invalid_argument("noise specification does not match the agent count");
  }
}

}  // namespace

ObservedFrame simulate_frame(const Scenario& scenario, std::uint64_t seed) {
  check_dimensions(scenario);
  if ((scenario.noise.toa_var.array() < 0.0).any()) {
    throw std::invalid_argument("TOA variance must be non-negative");
  }
  const int m = scenario.num_agents();
  const Eigen::MatrixXd factor = agent_noise_factor(scenario.noise.agent_cov);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd toa_noise(m);
  for (int i = 0; i < m; ++i) toa_noise(i) = normal(rng);
  toa_noise = toa_noise.cwiseProduct(scenario.noise.toa_var.cwiseSqrt());
  Eigen::VectorXd z(3 * m);
  for (int i = 0; i < 3 * m; ++i) z(i) = normal(rng);
  const Eigen::VectorXd agent_noise = factor * z;

  ObservedFrame frame;
  frame.noise = scenario.noise;
  frame.records.reserve(m);
  for (int i = 0; i < m; ++i) {
    const AgentTruth& agent = scenario.agents[i];
    FrameRecord rec;
    rec.slot_time = agent.slot_time;
    rec.toa = forward_toa(scenario.target, agent) + toa_noise(i);
    rec.broadcast.position = agent.position + agent_noise.segment<2>(3 * i);
    rec.broadcast.offset = agent.offset + agent_noise(3 * i + 2);
    frame.records.push_back(rec);
  }
  return frame;
}

ObservedFrame noiseless_frame(const Scenario& scenario) {
  check_dimensions(scenario);
  ObservedFrame frame;
  frame.noise = scenario.noise;
  for (const AgentTruth& agent : scenario.agents) {
    frame.records.push_back(
        {agent.slot_time, forward_toa(scenario.target, agent), {agent.position, agent.offset}});
  }
  return frame;
}

std::vector<Diagnostic> validate_scenario(const Scenario& scenario) {
  std::vector<Diagnostic> out;
  auto report = [&out](Severity s, std::string code, std::string msg) {
    out.push_back({s, std::move(code), std::move(msg)});
  };
  const int m = scenario.num_agents();
  if (m == 0) {
    report(Severity::kError, "empty", "scenario has no agents");
    return out;
  }
  if (!scenario.target.is_finite()) {
    report(Severity::kError, "non_finite", "target state has non-finite entries");
  }
  if (std::abs(scenario.target.skew) > kMaxSkew) {
    report(Severity::kError, "skew_bound", "target clock skew exceeds 100 ppm");
  }
  for (int i = 0; i < m; ++i) {
    const AgentTruth& a = scenario.agents[i];
    if (!a.position.allFinite() || !std::isfinite(a.offset) || !std::isfinite(a.slot_time)) {
      report(Severity::kError, "non_finite",
             "agent " + std::to_string(i) + " has non-finite entries");
    }
  }
  if (scenario.agents.front().slot_time != 0.0) {
    report(Severity::kError, "slot_origin", "first slot time must be 0 (slot origin)");
  }
  for (int i = 1; i < m; ++i) {
    if (!(scenario.agents[i].slot_time > scenario.agents[i - 1].slot_time)) {
      report(Severity::kError, "slot_order",
             "slot times not strictly increasing at agent " + std::to_string(i));
    }
  }

  const NoiseSpec& noise = scenario.noise;
  if (noise.toa_var.size() != m || noise.agent_cov.rows() != 3 * m ||
      noise.agent_cov.cols() != 3 * m) {
    report(Severity::kError, "dimension", "noise specification does not match agent count");
  } else {
    for (int i = 0; i < m; ++i) {
      if (!(noise.toa_var(i) >= 0.0)) {
        report(Severity::kError, "toa_var_negative",
               "TOA variance of agent " + std::to_string(i) + " is negative");
      } else if (noise.toa_var(i) == 0.0) {
        report(Severity::kWarning, "toa_var_zero",
               "TOA variance of agent " + std::to_string(i) + " is zero");
      }
    }
    const Eigen::MatrixXd& cov = noise.agent_cov;
    if (!cov.allFinite() || !(cov - cov.transpose()).isZero(1e-12 * std::max(1.0, cov.norm()))) {
      report(Severity::kError, "agent_cov_asymmetric", "agent covariance is not symmetric");
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff();
      const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
      if (lo < -1e-12 * scale) {
        report(Severity::kError, "agent_cov_indefinite", "agent covariance has a negative eigenvalue");
      } else if (lo <= 0.0) {
        report(Severity::kWarning, "agent_cov_singular",
               "agent covariance is singular (not positive definite)");
      }
    }
  }
  if (m < kNumLinearUnknowns) {
    std::ostringstream msg;
    msg << "underdetermined: " << m << " agents for " << kNumLinearUnknowns
        << " linear unknowns (M >= 9 required for estimation)";
    report(Severity::kWarning, "underdetermined", msg.str());
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::kError) return true;
  }
  return false;
}

}  // namespace seqtoa
