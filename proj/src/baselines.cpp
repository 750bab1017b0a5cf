#include "seqtoa/baselines.hpp"

#include <cmath>
#include <limits>

#include "seqtoa/error.hpp"

namespace seqtoa {

TargetState perturbed_init(const TargetState& truth, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  Vector6 x = truth.to_vector();
  for (int i = 0; i < 6; ++i) x(i) += normal(rng);
  return TargetState::from_vector(x);
}

namespace {

struct Linearization {
  Eigen::VectorXd residual;  // whitened
  Eigen::MatrixXd jacobian;  // whitened, M x 6
  double cost = 0.0;
};

Linearization linearize(const ObservedFrame& frame, const Eigen::VectorXd& inv_sigma,
                        const TargetState& x) {
  const int m = frame.num_agents();
  Linearization lin{Eigen::VectorXd(m), Eigen::MatrixXd(m, 6)};
  for (int i = 0; i < m; ++i) {
    const FrameRecord& rec = frame.records[i];
    const double t = rec.slot_time;
    const Vec2 diff = x.position + x.velocity * t - rec.broadcast.position;
    const double range = diff.norm();
    if (!(range > 0.0)) {
      throw EstimationError(ErrorKind::kDegenerateGeometry,
                            "MLE iterate coincides with agent " + std::to_string(i), i);
    }
    const Vec2 u = diff / range;
    const double predicted = range + x.offset + x.skew * t - rec.broadcast.offset;
    lin.residual(i) = (rec.toa - predicted) * inv_sigma(i);
    lin.jacobian.row(i) << u.x(), u.y(), t * u.x(), t * u.y(), 1.0, t;
    lin.jacobian.row(i) *= inv_sigma(i);
  }
  lin.cost = lin.residual.squaredNorm();
  return lin;
}

}  // namespace

EstimateReport mle_estimate(const ObservedFrame& frame, const MleConfig& cfg) {
  const int m = frame.num_agents();
  if (m < 6) {
    throw EstimationError(ErrorKind::kUnderdetermined, "MLE needs M >= 6 agents");
  }
  if (!(frame.noise.toa_var.array() > 0.0).all()) {
    throw EstimationError(ErrorKind::kInvalidInput, "C_tau must be positive definite");
  }
  const Eigen::VectorXd inv_sigma = frame.noise.toa_var.cwiseSqrt().cwiseInverse();

  EstimateReport report;
  report.estimator = "mle";
  TargetState x = cfg.init;
  TargetState best = x;
  double best_cost = std::numeric_limits<double>::infinity();
  double prev_step = std::numeric_limits<double>::infinity();
  int increases = 0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    const Linearization lin = linearize(frame, inv_sigma, x);
    if (lin.cost < best_cost) {
      best_cost = lin.cost;
      best = x;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lin.jacobian);
    if (qr.rank() < 6) {
      throw EstimationError(ErrorKind::kDegenerateGeometry, "MLE normal matrix is singular");
    }
    const Vector6 step = qr.solve(lin.residual);
    x = TargetState::from_vector(x.to_vector() + step);
    report.iterations = it + 1;

    const double step_norm = step.norm();
    if (!x.is_finite() || !std::isfinite(step_norm)) {
      report.diverged = true;
      break;
    }
    increases = step_norm > prev_step ? increases + 1 : 0;
    prev_step = step_norm;
    if (increases >= 3) {
      report.diverged = true;
      break;
    }
    if (step_norm <= cfg.step_tol) {
      report.converged = true;
      break;
    }
  }

  if (!report.diverged && x.is_finite()) {
    try {
      const double cost = linearize(frame, inv_sigma, x).cost;
      if (cost <= best_cost) best = x;
    } catch (const EstimationError&) {
      // keep the best earlier iterate
    }
  }
  report.state = best;
  return report;
}

TargetState StaticTswlsResult::as_state() const {
  TargetState s;
  s.position = position;
  s.offset = offset;
  return s;
}

StaticTswlsResult tswls_static_estimate(const ObservedFrame& frame) {
  StaticTswlsResult out;
  const int m = frame.num_agents();
  if (m < 5) {
    out.failure = "static TSWLS needs M >= 5 agents";
    return out;
  }

  Eigen::MatrixXd a(m, 4);
  Eigen::VectorXd y(m), alpha(m);
  for (int i = 0; i < m; ++i) {
    const FrameRecord& rec = frame.records[i];
    alpha(i) = rec.toa + rec.broadcast.offset;
    const Vec2& pa = rec.broadcast.position;
    a.row(i) << 2.0 * pa.x(), 2.0 * pa.y(), -2.0 * alpha(i), 1.0;
    y(i) = pa.squaredNorm() - alpha(i) * alpha(i);
  }

  // Solves N theta = b, rejecting numerically singular N.
  auto normal_solve = [&](const Eigen::Matrix4d& n, const Eigen::Vector4d& b,
                          Eigen::Vector4d& theta) {
    Eigen::LLT<Eigen::Matrix4d> llt(n);
    if (llt.info() != Eigen::Success || !(llt.rcond() > std::numeric_limits<double>::epsilon())) {
      return false;
    }
    theta = llt.solve(b);
    return theta.allFinite();
  };

  Eigen::Vector4d theta;
  if (!normal_solve(a.transpose() * a, a.transpose() * y, theta)) {
    out.failure = "ill-conditioned normal matrix (identity weighting)";
    return out;
  }

  const Vec2 p0 = theta.head<2>();
  const double t0 = theta(2);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, 3 * m);
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i) {
    d(i) = -2.0 * (t0 - alpha(i));
    b.block<1, 2>(i, 3 * i) = 2.0 * (p0 - frame.records[i].broadcast.position).transpose();
    b(i, 3 * i + 2) = d(i);
  }
  Eigen::MatrixXd ce = b * frame.noise.agent_cov * b.transpose();
  ce.diagonal() += d.cwiseAbs2().cwiseProduct(frame.noise.toa_var);
  Eigen::LLT<Eigen::MatrixXd> ce_llt(ce);
  if (ce_llt.info() != Eigen::Success) {
    out.failure = "singular error covariance";
    return out;
  }
  const Eigen::MatrixXd ce_inv = ce_llt.solve(Eigen::MatrixXd::Identity(m, m));
  const Eigen::Matrix4d normal = a.transpose() * ce_inv * a;
  if (!normal_solve(normal, a.transpose() * ce_inv * y, theta)) {
    out.failure = "ill-conditioned normal matrix (weighted)";
    return out;
  }

  // One Gauss-Newton step on theta = [p, T, T^2 - |p|^2] with C_wls^-1 = normal.
  const Eigen::Vector3d x0 = theta.head<3>();
  const Eigen::Vector4d f(x0(0), x0(1), x0(2), x0(2) * x0(2) - x0(0) * x0(0) - x0(1) * x0(1));
  Eigen::Matrix<double, 4, 3> jac = Eigen::Matrix<double, 4, 3>::Zero();
  jac.topRows<3>().setIdentity();
  jac.row(3) << -2.0 * x0(0), -2.0 * x0(1), 2.0 * x0(2);
  const Eigen::Matrix3d reduced = jac.transpose() * normal * jac;
  Eigen::LLT<Eigen::Matrix3d> red_llt(reduced);
  if (red_llt.info() != Eigen::Success) {
    out.failure = "singular refinement normal matrix";
    return out;
  }
  const Eigen::Vector3d x1 = x0 + red_llt.solve(jac.transpose() * normal * (theta - f));
  if (!x1.allFinite()) {
    out.failure = "non-finite refinement";
    return out;
  }
  out.ok = true;
  out.position = x1.head<2>();
  out.offset = x1(2);
  out.covariance = red_llt.solve(Eigen::Matrix3d::Identity());
  return out;
}

}  // namespace seqtoa
