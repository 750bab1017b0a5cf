#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include "seqtoa/error.hpp"
#include "seqtoa/estimator.hpp"
#include "test_support.hpp"

using namespace seqtoa;
using seqtoa::testing::fixed_scenario;
using seqtoa::testing::moving_target;

namespace {

using Quad = boost::multiprecision::cpp_bin_float_quad;
using MatrixQ = Eigen::Matrix<Quad, Eigen::Dynamic, Eigen::Dynamic>;
using VectorQ = Eigen::Matrix<Quad, Eigen::Dynamic, 1>;

struct LtcoSystem {
  DesignSystem sys;
  Eigen::MatrixXd weight;  // W with W^T W = C_e^-1
  Eigen::MatrixXd error_cov;
};

LtcoSystem ltco_system(std::uint64_t seed) {
  TargetState x = moving_target();
  x.offset = 3e5;
  const Scenario scn = fixed_scenario(1e-3, 1e-3, x);
  const ObservedFrame frame = simulate_frame(scn, seed);
  LtcoSystem out;
  out.sys = build_design(frame);
  out.error_cov = build_error_model(frame, x).error_cov;
  Eigen::LLT<Eigen::MatrixXd> llt(out.error_cov);
  out.weight = llt.matrixL().solve(Eigen::MatrixXd::Identity(frame.num_agents(), frame.num_agents()));
  return out;
}

// |W A theta - W y| evaluated in quad precision.
Quad residual(const LtcoSystem& s, const VectorQ& theta) {
  const MatrixQ wa = (s.weight * s.sys.design).cast<Quad>();
  const VectorQ wy = (s.weight * s.sys.rhs).cast<Quad>();
  return (wa * theta - wy).norm();
}

VectorQ reference_solve(const LtcoSystem& s) {
  const MatrixQ wa = (s.weight * s.sys.design).cast<Quad>();
  const VectorQ wy = (s.weight * s.sys.rhs).cast<Quad>();
  return Eigen::ColPivHouseholderQR<MatrixQ>(wa).solve(wy);
}

double singular_value_ratio(const Eigen::MatrixXd& a) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
}

}  // namespace

TEST(LtcoPrecision, DesignIsSeverelyIllConditioned) {
  const LtcoSystem s = ltco_system(1);
  EXPECT_GE(singular_value_ratio(s.weight * s.sys.design), 1e9);
}

TEST(LtcoPrecision, QrResidualTracksExtendedPrecisionReference) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const LtcoSystem s = ltco_system(seed);
    const Quad ref = residual(s, reference_solve(s));
    const WlsSolution qr = solve_wls_qr(s.sys, s.error_cov);
    const Quad got = residual(s, qr.theta.cast<Quad>());
    EXPECT_LE(got, 1e3 * ref) << "seed " << seed << " qr " << got << " ref " << ref;
  }
}

TEST(LtcoPrecision, NormalEquationsFailOrLoseAccuracy) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const LtcoSystem s = ltco_system(seed);
    const Quad ref = residual(s, reference_solve(s));
    try {
      const WlsSolution ne = solve_wls_normal(s.sys, s.error_cov);
      const Quad got = residual(s, ne.theta.cast<Quad>());
      EXPECT_GE(got, 100 * ref) << "seed " << seed;
    } catch (const EstimationError& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConditioning);
    }
  }
}
