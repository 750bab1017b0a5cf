#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqtoa/model.hpp"

namespace seqtoa {

// kMoving is the full sequential-TOA model with linear unknowns
// [x, y, vx, vy, T, w, T^2-|p|^2, w^2-|v|^2, T*w-p.v].
// kStatic drops velocity and skew: [x, y, T, T^2-|p|^2].
enum class MotionModel { kMoving, kStatic };

int linear_unknowns(MotionModel model);
int state_size(MotionModel model);

// Pseudo-linear system A * theta = y + e of one frame.
struct DesignSystem {
  Eigen::MatrixXd design;       // M x n
  Eigen::VectorXd rhs;          // M
  Eigen::VectorXd pseudorange;  // toa + broadcast offset, m
  MotionModel model = MotionModel::kMoving;
};

DesignSystem build_design(const ObservedFrame& frame,
                          MotionModel model = MotionModel::kMoving);

// First-order statistics of the linearization error e = B dBeta + D dTau.
struct ErrorModel {
  Eigen::MatrixXd agent_coupling;  // B, M x 3M, row m non-zero only in block m
  Eigen::VectorXd toa_coupling;    // diagonal of D
  Eigen::MatrixXd error_cov;       // C_e = B C_beta B^T + D C_tau D^T
};

// Throws kConditioning when C_e is not numerically positive definite.
ErrorModel build_error_model(const ObservedFrame& frame, const TargetState& reference);

enum class Whitening { kCholesky, kSymmetricSqrt };

struct WlsSolution {
  Eigen::VectorXd theta;
  Eigen::MatrixXd covariance;
  // Upper-triangular-after-permutation S with S^T S = covariance^-1
  // (S = R P^T for the QR path).
  Eigen::MatrixXd sqrt_information;
  Eigen::VectorXi permutation;  // column j of R corresponds to theta(permutation(j))
  double cond_estimate = 1.0;
  int rank = 0;

  // Wraps a given estimate and covariance; used when Step I is bypassed.
  static WlsSolution from_covariance(const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov);
};

// Whitened least squares by column-pivoted Householder QR.
// Throws kUnderdetermined (M < n), kConditioning (C_e not PD) or
// kRankDeficient with the numerical rank as detail.
WlsSolution solve_wls_qr(const DesignSystem& system, const Eigen::MatrixXd& error_cov,
                         Whitening whitening = Whitening::kCholesky);

// Same estimator via the explicit normal equations (A^T C_e^-1 A)^-1 A^T C_e^-1 y.
// Throws kConditioning when the normal matrix is not numerically PD.
WlsSolution solve_wls_normal(const DesignSystem& system, const Eigen::MatrixXd& error_cov);

Vector9 theta_model(const TargetState& x);
Eigen::Matrix<double, 9, 6> theta_jacobian(const TargetState& x);

// [x, y, T, T^2 - |p|^2] and its 4x3 Jacobian.
Eigen::Vector4d static_theta_model(const Vec2& position, double offset);
Eigen::Matrix<double, 4, 3> static_theta_jacobian(const Vec2& position, double offset);

struct EstimateReport {
  std::string estimator = "proposed";
  TargetState state;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  double cond_estimate = 1.0;
  Eigen::MatrixXd wls_covariance;
};

inline constexpr int kMaxRefineIterations = 5;

// Gauss-Newton retraction of the state from a Step-I solution. The layout
// (moving or static) follows wls.theta.size(). Stops once the squared
// position step is at most mean(agent_position_traces), or after
// max_iterations. Throws kDegenerateGeometry if J^T C^-1 J is singular.
EstimateReport gauss_newton_refine(const WlsSolution& wls,
                                   std::span<const double> agent_position_traces,
                                   int max_iterations = kMaxRefineIterations);

enum class LinearSolver { kPivotedQr, kNormalEquations };

struct EstimatorOptions {
  MotionModel model = MotionModel::kMoving;
  LinearSolver solver = LinearSolver::kPivotedQr;
  int max_iterations = kMaxRefineIterations;
};

// Two-pass pipeline: identity-weighted solve, C_e at the truncated solution,
// weighted solve, Gauss-Newton retraction.
EstimateReport estimate(const ObservedFrame& frame, const EstimatorOptions& options = {});

}  // namespace seqtoa
