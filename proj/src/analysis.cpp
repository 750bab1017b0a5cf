#include "seqtoa/analysis.hpp"

#include <limits>
#include <sstream>

#include "seqtoa/error.hpp"
#include "seqtoa/estimator.hpp"

namespace seqtoa {

std::pair<RowVector6, Eigen::RowVector3d> toa_gradients(const TargetState& x,
                                                        const AgentTruth& agent) {
  const double t = agent.slot_time;
  const Vec2 diff = x.position + x.velocity * t - agent.position;
  const double range = diff.norm();
  if (!(range > 0.0)) {
    throw EstimationError(ErrorKind::kSingularGeometry,
                          "target trajectory coincides with an agent position");
  }
  const Vec2 unit = diff / range;
  RowVector6 dx;
  dx << unit.x(), unit.y(), t * unit.x(), t * unit.y(), 1.0, t;
  const Eigen::RowVector3d dbeta(-unit.x(), -unit.y(), -1.0);
  return {dx, dbeta};
}

namespace {

struct Gradients {
  Eigen::MatrixXd target;  // M x 6
  Eigen::MatrixXd agent;   // M x 3M, block diagonal rows
};

Gradients stacked_gradients(const Scenario& scenario) {
  const int m = scenario.num_agents();
  Gradients g{Eigen::MatrixXd(m, 6), Eigen::MatrixXd::Zero(m, 3 * m)};
  for (int i = 0; i < m; ++i) {
    try {
      const auto [dx, dbeta] = toa_gradients(scenario.target, scenario.agents[i]);
      g.target.row(i) = dx;
      g.agent.block<1, 3>(i, 3 * i) = dbeta;
    } catch (const EstimationError& e) {
      throw EstimationError(e.kind(), std::string(e.what()) + " (agent " + std::to_string(i) + ")",
                            i);
    }
  }
  return g;
}

void check_noise(const Scenario& scenario) {
  const int m = scenario.num_agents();
  const NoiseSpec& noise = scenario.noise;
  if (noise.toa_var.size() != m || noise.agent_cov.rows() != 3 * m ||
      noise.agent_cov.cols() != 3 * m) {
    throw EstimationError(ErrorKind::kInvalidInput, "noise spec does not match agent count");
  }
  if (!(noise.toa_var.array() > 0.0).all()) {
    throw EstimationError(ErrorKind::kInvalidInput, "C_tau must be positive definite");
  }
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, ErrorKind kind, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw EstimationError(kind, what);
  return llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

// Triangular 6x6 factor R of H_x^T C_tau^-1 H_x minus the information carried
// away by the nuisance columns H_b, from a QR of the stacked square-root
// information with the nuisance columns first.
Matrix6 marginal_sqrt_information(const Eigen::MatrixXd& nuisance, const Eigen::MatrixXd& target,
                                  const NoiseSpec& noise) {
  const Eigen::Index m = target.rows();
  const Eigen::Index k = nuisance.cols();
  if (m < 6) {
    throw EstimationError(ErrorKind::kUnobservable, "fewer than 6 agents leave the target unobservable");
  }
  Eigen::LLT<Eigen::MatrixXd> agent_cov_llt(noise.agent_cov);
  if (agent_cov_llt.info() != Eigen::Success) {
    throw EstimationError(ErrorKind::kInvalidInput, "C_beta must be positive definite");
  }
  const Eigen::VectorXd white = noise.toa_var.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(m + k, k + 6);
  stacked.topLeftCorner(m, k) = white.asDiagonal() * nuisance;
  stacked.topRightCorner(m, 6) = white.asDiagonal() * target;
  stacked.bottomLeftCorner(k, k) = agent_cov_llt.matrixL().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  return qr.matrixQR().block(k, k, 6, 6).triangularView<Eigen::Upper>();
}

Matrix6 inverse_from_sqrt_information(const Matrix6& r, const char* what) {
  Eigen::LLT<Matrix6> llt(r.transpose() * r);
  if (llt.info() != Eigen::Success ||
      !(llt.rcond() > 10.0 * std::numeric_limits<double>::epsilon())) {
    throw EstimationError(ErrorKind::kUnobservable, what);
  }
  const Matrix6 r_inv = r.triangularView<Eigen::Upper>().solve(Matrix6::Identity());
  return r_inv * r_inv.transpose();
}

}  // namespace

FimBlocks fim_blocks(const Scenario& scenario) {
  check_noise(scenario);
  const Gradients g = stacked_gradients(scenario);
  const Eigen::VectorXd info = scenario.noise.toa_var.cwiseInverse();
  FimBlocks fim;
  fim.target = g.target.transpose() * info.asDiagonal() * g.target;
  fim.cross = g.target.transpose() * info.asDiagonal() * g.agent;
  fim.agent = g.agent.transpose() * info.asDiagonal() * g.agent +
              spd_inverse(scenario.noise.agent_cov, ErrorKind::kInvalidInput,
                          "C_beta must be positive definite");
  return fim;
}

CrlbResult crlb_target(const Scenario& scenario) {
  const FimBlocks fim = fim_blocks(scenario);
  const Gradients g = stacked_gradients(scenario);
  const Matrix6 r = marginal_sqrt_information(g.agent, g.target, scenario.noise);
  CrlbResult out;
  out.target_bound = inverse_from_sqrt_information(
      r, "Schur complement of the FIM is singular (unobservable geometry)");
  const Eigen::Index n = 6 + fim.agent.rows();
  out.full_fim.resize(n, n);
  out.full_fim.topLeftCorner<6, 6>() = fim.target;
  out.full_fim.topRightCorner(6, n - 6) = fim.cross;
  out.full_fim.bottomLeftCorner(n - 6, 6) = fim.cross.transpose();
  out.full_fim.bottomRightCorner(n - 6, n - 6) = fim.agent;
  return out;
}

namespace {

ErrorModel truth_error_model(const Scenario& scenario) {
  const ObservedFrame truth_frame = noiseless_frame(scenario);
  for (int i = 0; i < scenario.num_agents(); ++i) {
    const FrameRecord& rec = truth_frame.records[i];
    const double t = rec.slot_time;
    if (rec.toa + rec.broadcast.offset - scenario.target.offset - scenario.target.skew * t == 0.0) {
      throw EstimationError(ErrorKind::kDivision, "d_m is zero for agent " + std::to_string(i), i);
    }
  }
  return build_error_model(truth_frame, scenario.target);
}

Matrix6 direct_cov(const Eigen::MatrixXd& design, const Scenario& scenario) {
  const ErrorModel em = truth_error_model(scenario);
  const Eigen::MatrixXd aj = design * theta_jacobian(scenario.target);
  Eigen::LLT<Eigen::MatrixXd> ce(em.error_cov);
  const Eigen::MatrixXd white = ce.matrixL().solve(aj);
  const Matrix6 info = white.transpose() * white;
  Eigen::LLT<Matrix6> llt(info);
  if (llt.info() != Eigen::Success) {
    throw EstimationError(ErrorKind::kUnobservable, "(AJ)^T C_e^-1 AJ is singular");
  }
  return llt.solve(Matrix6::Identity());
}

}  // namespace

Matrix6 analytic_cov(const Scenario& scenario) {
  check_noise(scenario);
  return direct_cov(build_design(noiseless_frame(scenario)).design, scenario);
}

Matrix6 analytic_cov(const Scenario& scenario, const ObservedFrame& frame) {
  check_noise(scenario);
  return direct_cov(build_design(frame).design, scenario);
}

Matrix6 analytic_cov_factored(const Scenario& scenario) {
  check_noise(scenario);
  const ObservedFrame truth_frame = noiseless_frame(scenario);
  const ErrorModel em = truth_error_model(scenario);
  const Eigen::VectorXd d_inv = em.toa_coupling.cwiseInverse();
  const Eigen::MatrixXd aj = build_design(truth_frame).design * theta_jacobian(scenario.target);
  const Eigen::MatrixXd g1 = d_inv.asDiagonal() * em.agent_coupling;
  const Eigen::MatrixXd g2 = d_inv.asDiagonal() * aj;
  return inverse_from_sqrt_information(marginal_sqrt_information(g1, g2, scenario.noise),
                                       "factored information matrix is singular");
}

}  // namespace seqtoa
