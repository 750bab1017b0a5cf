#pragma once

#include <utility>

#include <Eigen/Dense>

#include "seqtoa/model.hpp"

namespace seqtoa {

using RowVector6 = Eigen::Matrix<double, 1, 6>;

// d tau_m / d x and d tau_m / d beta_m at the given state.
// Throws kSingularGeometry when the target trajectory point hits the agent.
std::pair<RowVector6, Eigen::RowVector3d> toa_gradients(const TargetState& x,
                                                        const AgentTruth& agent);

// Fisher information of eta = [x; beta], partitioned as [[R1, R2], [R2^T, R3]].
struct FimBlocks {
  Matrix6 target;         // R1
  Eigen::MatrixXd cross;  // R2, 6 x 3M
  Eigen::MatrixXd agent;  // R3, 3M x 3M, includes C_beta^-1
};

FimBlocks fim_blocks(const Scenario& scenario);

struct CrlbResult {
  Matrix6 target_bound;      // (R1 - R2 R3^-1 R2^T)^-1
  Eigen::MatrixXd full_fim;  // (6+3M) x (6+3M)
};

// Throws kInvalidInput when C_tau or C_beta is not PD and kUnobservable when
// the Schur complement is singular.
CrlbResult crlb_target(const Scenario& scenario);

// First-order covariance of the two-step estimator, ((AJ)^T C_e^-1 AJ)^-1,
// with A, B, D, J at the scenario truth.
Matrix6 analytic_cov(const Scenario& scenario);

// As above but A is built from the observed frame (B, D, J stay at truth).
Matrix6 analytic_cov(const Scenario& scenario, const ObservedFrame& frame);

// Matrix-inversion-lemma form with G1 = D^-1 B and G2 = D^-1 A J, all at
// truth. Throws kDivision carrying the agent index when some d_m is zero.
Matrix6 analytic_cov_factored(const Scenario& scenario);

}  // namespace seqtoa
