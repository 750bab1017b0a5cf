#include "seqtoa/estimator.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "seqtoa/error.hpp"

namespace seqtoa {

int linear_unknowns(MotionModel model) { return model == MotionModel::kMoving ? 9 : 4; }
int state_size(MotionModel model) { return model == MotionModel::kMoving ? 6 : 3; }

DesignSystem build_design(const ObservedFrame& frame, MotionModel model) {
  const int m = frame.num_agents();
  const int n = linear_unknowns(model);
  if (m < n) {
    std::ostringstream msg;
    msg << "underdetermined frame: " << m << " agents, M >= " << n << " required";
    throw EstimationError(ErrorKind::kUnderdetermined, msg.str());
  }
  DesignSystem sys;
  sys.model = model;
  sys.design.resize(m, n);
  sys.rhs.resize(m);
  sys.pseudorange.resize(m);
  for (int i = 0; i < m; ++i) {
    const FrameRecord& rec = frame.records[i];
    const double t = rec.slot_time;
    const Vec2& pa = rec.broadcast.position;
    const double alpha = rec.toa + rec.broadcast.offset;
    sys.pseudorange(i) = alpha;
    sys.rhs(i) = pa.squaredNorm() - alpha * alpha;
    if (model == MotionModel::kMoving) {
      sys.design.row(i) << 2.0 * pa.x(), 2.0 * pa.y(), 2.0 * t * pa.x(), 2.0 * t * pa.y(),
          -2.0 * alpha, -2.0 * t * alpha, 1.0, t * t, 2.0 * t;
    } else {
      sys.design.row(i) << 2.0 * pa.x(), 2.0 * pa.y(), -2.0 * alpha, 1.0;
    }
  }
  return sys;
}

ErrorModel build_error_model(const ObservedFrame& frame, const TargetState& reference) {
  const int m = frame.num_agents();
  if (frame.noise.toa_var.size() != m || frame.noise.agent_cov.rows() != 3 * m) {
    throw EstimationError(ErrorKind::kInvalidInput, "noise spec does not match frame size");
  }
  ErrorModel em;
  em.agent_coupling = Eigen::MatrixXd::Zero(m, 3 * m);
  em.toa_coupling.resize(m);
  for (int i = 0; i < m; ++i) {
    const FrameRecord& rec = frame.records[i];
    const double t = rec.slot_time;
    const double alpha = rec.toa + rec.broadcast.offset;
    const double d = -2.0 * (reference.offset + reference.skew * t - alpha);
    const Vec2 moved = reference.position + reference.velocity * t;
    em.toa_coupling(i) = d;
    em.agent_coupling.block<1, 2>(i, 3 * i) = 2.0 * (moved - rec.broadcast.position).transpose();
    em.agent_coupling(i, 3 * i + 2) = d;
  }
  em.error_cov = em.agent_coupling * frame.noise.agent_cov * em.agent_coupling.transpose();
  em.error_cov.diagonal() += em.toa_coupling.cwiseAbs2().cwiseProduct(frame.noise.toa_var);

  Eigen::LLT<Eigen::MatrixXd> llt(em.error_cov);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw EstimationError(ErrorKind::kConditioning,
                          "error covariance C_e is numerically singular");
  }
  return em;
}

namespace {

struct Whitened {
  Eigen::MatrixXd design;
  Eigen::VectorXd rhs;
};

Whitened whiten(const DesignSystem& sys, const Eigen::MatrixXd& error_cov, Whitening how) {
  const Eigen::Index m = sys.design.rows();
  if (error_cov.rows() != m || error_cov.cols() != m) {
    throw EstimationError(ErrorKind::kInvalidInput, "C_e dimension does not match the design");
  }
  Whitened out;
  if (how == Whitening::kCholesky) {
    Eigen::LLT<Eigen::MatrixXd> llt(error_cov);
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
      throw EstimationError(ErrorKind::kConditioning, "C_e is not positive definite");
    }
    out.design = llt.matrixL().solve(sys.design);
    out.rhs = llt.matrixL().solve(sys.rhs);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(error_cov);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
      throw EstimationError(ErrorKind::kConditioning, "C_e is not positive definite");
    }
    const Eigen::MatrixXd w = eig.eigenvectors() *
                              eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                              eig.eigenvectors().transpose();
    out.design = w * sys.design;
    out.rhs = w * sys.rhs;
  }
  return out;
}

void require_rows(const DesignSystem& sys) {
  if (sys.design.rows() < sys.design.cols()) {
    std::ostringstream msg;
    msg << "underdetermined system: " << sys.design.rows() << " rows for "
        << sys.design.cols() << " unknowns";
    throw EstimationError(ErrorKind::kUnderdetermined, msg.str());
  }
}

}  // namespace

WlsSolution WlsSolution::from_covariance(const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw EstimationError(ErrorKind::kConditioning, "covariance is not positive definite");
  }
  const Eigen::Index n = theta.size();
  WlsSolution sol;
  sol.theta = theta;
  sol.covariance = cov;
  sol.sqrt_information = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  sol.permutation = Eigen::VectorXi::LinSpaced(n, 0, static_cast<int>(n) - 1);
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal().cwiseAbs();
  sol.cond_estimate = diag.maxCoeff() / diag.minCoeff();
  sol.rank = static_cast<int>(n);
  return sol;
}

WlsSolution solve_wls_qr(const DesignSystem& system, const Eigen::MatrixXd& error_cov,
                         Whitening whitening) {
  require_rows(system);
  const Whitened w = whiten(system, error_cov, whitening);
  const Eigen::Index n = w.design.cols();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w.design);
  const int rank = static_cast<int>(qr.rank());
  if (rank < n) {
    std::ostringstream msg;
    msg << "whitened design is rank deficient: numerical rank " << rank << " < " << n;
    throw EstimationError(ErrorKind::kRankDeficient, msg.str(), rank);
  }

  // R P^T theta = Q^T W y, solved by back substitution.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qty = (qr.householderQ().transpose() * w.rhs).head(n);
  const Eigen::VectorXd z = r.triangularView<Eigen::Upper>().solve(qty);

  WlsSolution sol;
  sol.theta = qr.colsPermutation() * z;
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
  sol.covariance = qr.colsPermutation() * (r_inv * r_inv.transpose()) *
                   qr.colsPermutation().transpose();
  sol.sqrt_information = r * qr.colsPermutation().transpose();
  sol.permutation = qr.colsPermutation().indices();
  sol.cond_estimate = std::abs(r(0, 0) / r(n - 1, n - 1));
  sol.rank = rank;
  return sol;
}

WlsSolution solve_wls_normal(const DesignSystem& system, const Eigen::MatrixXd& error_cov) {
  require_rows(system);
  const Whitened w = whiten(system, error_cov, Whitening::kCholesky);
  const Eigen::Index n = w.design.cols();
  const Eigen::MatrixXd normal = w.design.transpose() * w.design;
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (llt.info() != Eigen::Success || !(rcond > std::numeric_limits<double>::epsilon())) {
    throw EstimationError(ErrorKind::kConditioning,
                          "normal matrix A^T C_e^-1 A is numerically singular");
  }
  WlsSolution sol;
  sol.theta = llt.solve(w.design.transpose() * w.rhs);
  sol.covariance = llt.solve(Eigen::MatrixXd::Identity(n, n));
  sol.sqrt_information = llt.matrixU();
  sol.permutation = Eigen::VectorXi::LinSpaced(n, 0, static_cast<int>(n) - 1);
  sol.cond_estimate = std::sqrt(1.0 / rcond);
  sol.rank = static_cast<int>(n);
  return sol;
}

Vector9 theta_model(const TargetState& x) {
  Vector9 theta;
  theta << x.to_vector(), x.offset * x.offset - x.position.squaredNorm(),
      x.skew * x.skew - x.velocity.squaredNorm(),
      x.offset * x.skew - x.position.dot(x.velocity);
  return theta;
}

Eigen::Matrix<double, 9, 6> theta_jacobian(const TargetState& x) {
  const double px = x.position.x(), py = x.position.y();
  const double vx = x.velocity.x(), vy = x.velocity.y();
  Eigen::Matrix<double, 9, 6> jac = Eigen::Matrix<double, 9, 6>::Zero();
  jac.topRows<6>().setIdentity();
  jac.row(6) << -2.0 * px, -2.0 * py, 0.0, 0.0, 2.0 * x.offset, 0.0;
  jac.row(7) << 0.0, 0.0, -2.0 * vx, -2.0 * vy, 0.0, 2.0 * x.skew;
  jac.row(8) << -vx, -vy, -px, -py, x.skew, x.offset;
  return jac;
}

Eigen::Vector4d static_theta_model(const Vec2& position, double offset) {
  return {position.x(), position.y(), offset, offset * offset - position.squaredNorm()};
}

Eigen::Matrix<double, 4, 3> static_theta_jacobian(const Vec2& position, double offset) {
  Eigen::Matrix<double, 4, 3> jac = Eigen::Matrix<double, 4, 3>::Zero();
  jac.topRows<3>().setIdentity();
  jac.row(3) << -2.0 * position.x(), -2.0 * position.y(), 2.0 * offset;
  return jac;
}

namespace {

// Head of theta as a state; the static layout has zero velocity and skew.
TargetState truncate(const Eigen::VectorXd& theta) {
  TargetState s;
  if (theta.size() == 9) return TargetState::from_vector(theta.head<6>());
  s.position = theta.head<2>();
  s.offset = theta(2);
  return s;
}

Eigen::VectorXd state_vector(const TargetState& s, bool moving) {
  if (moving) return s.to_vector();
  return Eigen::Vector3d(s.position.x(), s.position.y(), s.offset);
}

void apply_step(TargetState& s, const Eigen::VectorXd& step, bool moving) {
  if (moving) {
    s = TargetState::from_vector(s.to_vector() + step);
  } else {
    s.position += step.head<2>();
    s.offset += step(2);
  }
}

}  // namespace

EstimateReport gauss_newton_refine(const WlsSolution& wls,
                                   std::span<const double> agent_position_traces,
                                   int max_iterations) {
  const Eigen::Index n = wls.theta.size();
  if (n != 9 && n != 4) {
    throw EstimationError(ErrorKind::kInvalidInput, "theta must have 9 or 4 entries");
  }
  const bool moving = n == 9;
  const double threshold =
      agent_position_traces.empty()
          ? 0.0
          : std::accumulate(agent_position_traces.begin(), agent_position_traces.end(), 0.0) /
                static_cast<double>(agent_position_traces.size());

  EstimateReport report;
  report.state = truncate(wls.theta);
  report.cond_estimate = wls.cond_estimate;
  report.wls_covariance = wls.covariance;

  // Each step minimizes |S (theta_hat - f(x) - J dx)| with S^T S = C_wls^-1,
  // i.e. dx = (J^T C^-1 J)^-1 J^T C^-1 r without forming C^-1.
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd residual;
    Eigen::MatrixXd jac;
    if (moving) {
      residual = wls.theta - theta_model(report.state);
      jac = theta_jacobian(report.state);
    } else {
      residual = wls.theta - static_theta_model(report.state.position, report.state.offset);
      jac = static_theta_jacobian(report.state.position, report.state.offset);
    }
    const Eigen::MatrixXd weighted_jac = wls.sqrt_information * jac;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(weighted_jac);
    if (qr.rank() < jac.cols()) {
      throw EstimationError(ErrorKind::kDegenerateGeometry,
                            "Gauss-Newton normal matrix J^T C^-1 J is singular");
    }
    const Eigen::VectorXd step = qr.solve(wls.sqrt_information * residual);
    apply_step(report.state, step, moving);
    report.iterations = it + 1;
    if (!state_vector(report.state, moving).allFinite()) {
      throw EstimationError(ErrorKind::kDegenerateGeometry, "Gauss-Newton iterate is not finite");
    }
    if (step.head<2>().squaredNorm() <= threshold) {
      report.converged = true;
      break;
    }
  }
  return report;
}

EstimateReport estimate(const ObservedFrame& frame, const EstimatorOptions& options) {
  const DesignSystem system = build_design(frame, options.model);
  const int m = frame.num_agents();
  auto solve = [&](const Eigen::MatrixXd& cov) {
    return options.solver == LinearSolver::kPivotedQr ? solve_wls_qr(system, cov)
                                                      : solve_wls_normal(system, cov);
  };

  const WlsSolution first = solve(Eigen::MatrixXd::Identity(m, m));
  const ErrorModel errors = build_error_model(frame, truncate(first.theta));
  const WlsSolution second = solve(errors.error_cov);

  const std::vector<double> traces = frame.noise.agent_position_traces();
  EstimateReport report = gauss_newton_refine(second, traces, options.max_iterations);
  report.estimator = options.model == MotionModel::kMoving ? "proposed" : "proposed_static";
  return report;
}

}  // namespace seqtoa
