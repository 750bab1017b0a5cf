#pragma once

#include <random>
#include <string>

#include <Eigen/Dense>

#include "seqtoa/estimator.hpp"
#include "seqtoa/model.hpp"

namespace seqtoa {

struct MleConfig {
  TargetState init;
  int max_iters = 20;
  double step_tol = 1e-6;                // on the full state step norm
  double init_perturbation_sigma = 1.0;  // per component, for perturbed_init()
};

// Truth plus N(0, sigma^2) on every state component.
TargetState perturbed_init(const TargetState& truth, double sigma, std::mt19937_64& rng);

// Gauss-Newton maximum likelihood on the TOAs alone, taking the broadcast
// agent positions and offsets as exact. Divergence (three consecutive step
// norm increases or a non-finite iterate) is flagged in the report, never
// thrown. Throws kUnderdetermined for M < 6 and kDegenerateGeometry when the
// normal matrix is singular.
EstimateReport mle_estimate(const ObservedFrame& frame, const MleConfig& cfg);

struct StaticTswlsResult {
  bool ok = false;
  std::string failure;
  Vec2 position = Vec2::Zero();
  double offset = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();

  TargetState as_state() const;
};

// Two-step WLS for a static target with unknowns [x, y, T, T^2 - |p|^2],
// explicit normal equations and a single refinement step. Slot times are
// ignored. Ill-conditioned normal matrices produce a failure record.
StaticTswlsResult tswls_static_estimate(const ObservedFrame& frame);

}  // namespace seqtoa
