#include <rfl/mse_metrics.hpp>
#include <rfl/robust_lmi.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

using namespace rfl;
using namespace rfl::testing;

TEST(Schur, IdentityBlocks) {
  const CMat I2 = CMat::Identity(2, 2);
  const CMat D = schur_assemble(I2, CMat::Zero(2, 2), I2);
  EXPECT_LE((D - CMat::Identity(4, 4)).norm(), 0.0);
  const SchurCheck s = schur_psd_check(I2, CMat::Zero(2, 2), I2);
  EXPECT_TRUE(s.block_psd);
  EXPECT_TRUE(s.complement_psd);
  EXPECT_NEAR(s.complement_min_eig, 1.0, 1e-12);
}

TEST(Schur, ScalarIndefinite) {
  CMat a(1, 1), b(1, 1), c(1, 1);
  a << 1.0;
  b << 2.0;
  c << 1.0;
  const SchurCheck s = schur_psd_check(a, b, c);
  EXPECT_NEAR(s.complement_min_eig, -3.0, 1e-12);
  EXPECT_FALSE(s.block_psd);
  EXPECT_FALSE(s.complement_psd);
  EXPECT_NEAR(schur_assemble(a, b, c).determinant().real(), -3.0, 1e-12);
}

TEST(Schur, RandomInstancesAgree) {
  Rng rng(17);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const int n = dim(rng);
    const int m = dim(rng);
    const CMat g = random_cmat(m, m, rng);
    const CMat c = g * g.adjoint() + 0.1 * CMat::Identity(m, m);
    const CMat a = random_hermitian(n, rng) + u(rng) * CMat::Identity(n, n) * double(n);
    const CMat b = random_cmat(m, n, rng, 0.5);
    const SchurCheck s = schur_psd_check(a, b, c);
    EXPECT_EQ(s.block_psd, s.complement_psd) << s.block_min_eig << " " << s.complement_min_eig;
    EXPECT_NEAR(min_eig(schur_assemble(a, b, c)), s.block_min_eig, 1e-9);
  }
}

TEST(RobustQuadraticLmi, NoCouplingIsFeasibleAtZeroMultiplier) {
  Rng rng(2);
  const CMat g = random_cmat(3, 3, rng);
  RobustQuadratic rq;
  rq.A = AffineCMatrix(CMat(g * g.adjoint()));
  rq.B = AffineCMatrix(CMat(CMat::Zero(2, 3)));
  rq.c = random_cvec(3, rng);
  rq.radius = 0.5;
  RVec x = RVec::Zero(1);
  EXPECT_GE(min_eig(lemma2_lmi(rq, 0).evaluate(x)), -1e-12);
}

TEST(RobustQuadraticLmi, ZeroRadiusReducesToNominal) {
  Rng rng(3);
  const CMat g = random_cmat(3, 3, rng);
  RobustQuadratic rq;
  rq.A = AffineCMatrix(CMat(g * g.adjoint()));
  rq.B = AffineCMatrix(random_cmat(2, 3, rng));
  rq.c = random_cvec(3, rng);
  rq.radius = 0.0;
  const LmiMargin mg = lmi_margin(lemma2_lmi(rq, 0), 1, {0});
  ASSERT_TRUE(mg.solved);
  EXPECT_GE(mg.t, -1e-9);
}

// Both directions of the LMI equivalence by sampling plus the aligned witness.
TEST(RobustQuadraticLmi, SamplingSoundness) {
  int feasible = 0;
  int infeasible = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const RobustQuadraticTrial t = robust_quadratic_trial(1000 + seed, 2000);
    ASSERT_TRUE(t.solved) << seed;
    if (t.lmi_feasible) {
      ++feasible;
      EXPECT_GE(t.sampled_min_eig, -1e-7) << "seed " << seed << " margin " << t.margin;
    } else {
      ++infeasible;
    }
    if (t.sampled_min_eig < -1e-7) {
      EXPECT_FALSE(t.lmi_feasible) << seed;
    }
    // an infeasible LMI always has a violating point; the witness finds it
    if (!t.lmi_feasible) {
      EXPECT_LT(t.witness_min_eig, 1e-6) << seed;
    }
  }
  EXPECT_GT(feasible, 5);
  EXPECT_GT(infeasible, 5);
}

namespace {

conic::ConicProgram uplink_program(const UplinkLmiSpec& s, double p_dev, bool direct) {
  conic::ConicProgram p(4);  // b re, b im, rho, alpha
  if (direct)
    p.soc_constraints.push_back(uplink_direct_constraint(s));
  else
    add_lmi(p, uplink_robust_lmi(s));
  p.soc_constraints.push_back({{conic::AffineScalar(0.0).add(0, 1.0), conic::AffineScalar(0.0).add(1, 1.0)},
                               conic::AffineScalar(std::sqrt(p_dev))});
  p.objective(2) = 1.0;
  return p;
}

UplinkLmiSpec uplink_spec(Rng& rng, double eps) {
  UplinkLmiSpec s;
  s.b = CAffine::variable(0, 1);
  s.z = constant_vec(random_cvec(4, rng));
  s.h_hat = random_cvec(4, rng);
  s.eps = eps;
  s.rho_var = 2;
  s.alpha_var = 3;
  s.stage = Stage::feasibility;
  return s;
}

}  // namespace

TEST(UplinkLmi, ZeroRadiusExactInversion) {
  Rng rng(4);
  const CVec z = random_cvec(3, rng);
  const CVec h = random_cvec(3, rng);
  UplinkLmiSpec s;
  s.b = CAffine(1.0 / z.dot(h));
  s.z = constant_vec(z);
  s.h_hat = h;
  s.eps = 0.0;
  s.rho_var = 0;
  s.chi_var = 1;
  s.alpha_var = 2;
  const LmiBlock blk = uplink_robust_lmi(s);
  for (double rho : {-0.5, -0.1, 0.0, 0.2}) {
    RVec x(3);
    x << rho, 0.1, 0.0;
    EXPECT_EQ(min_eig(blk.evaluate(x)) >= -1e-12, rho + 0.1 >= 0.0) << rho;
  }
}

TEST(UplinkLmi, SolvedBlockMatchesWorstCase) {
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    const UplinkLmiSpec s = uplink_spec(rng, 0.1);
    const conic::ConicSolution sol = conic::solve(uplink_program(s, 0.5, false));
    ASSERT_TRUE(sol.optimal()) << sol.message;
    const CVec z = evaluate(s.z, sol.x);
    const cplx b = s.b.evaluate(sol.x);
    const double term = std::pow(std::abs(z.dot(s.h_hat) * b - 1.0) + s.eps * std::abs(b) * z.norm(), 2);
    EXPECT_LE(term, sol.x(2) + 1e-6);
    EXPECT_NEAR(term, sol.x(2), 1e-5);
    EXPECT_GE(min_eig(uplink_robust_lmi(s).evaluate(sol.x)), -1e-8);
  }
}

TEST(UplinkLmi, ZeroRadiusDirectFormAgrees) {
  Rng rng(6);
  for (int i = 0; i < 5; ++i) {
    const UplinkLmiSpec s = uplink_spec(rng, 0.0);
    const conic::ConicSolution a = conic::solve(uplink_program(s, 0.3, false));
    const conic::ConicSolution b = conic::solve(uplink_program(s, 0.3, true));
    ASSERT_TRUE(a.optimal() && b.optimal());
    EXPECT_NEAR(a.objective_value, b.objective_value, 1e-6);
  }
}

TEST(UplinkLmi, BothSidesFreeIsRejected) {
  UplinkLmiSpec s;
  s.b = CAffine::variable(0, 1);
  s.z = variable_vec(2, 2);
  s.h_hat = CVec::Ones(2);
  s.eps = 0.1;
  s.rho_var = 6;
  s.alpha_var = 7;
  EXPECT_THROW(uplink_robust_lmi(s), BilinearityError);
}

namespace {

DownlinkLmiSpec downlink_spec(Rng& rng, double eps) {
  DownlinkLmiSpec s;
  s.v = CAffine::variable(0, 1);
  s.w = constant_vec(random_cvec(4, rng));
  s.h_hat = random_cvec(4, rng);
  s.eps = eps;
  s.theta_var = 2;
  s.beta_var = 3;
  return s;
}

conic::ConicProgram downlink_program(const DownlinkLmiSpec& s, bool direct) {
  conic::ConicProgram p(4);
  if (direct)
    p.soc_constraints.push_back(downlink_direct_constraint(s));
  else
    add_lmi(p, downlink_robust_lmi(s));
  p.objective(2) = 1.0;
  // keep |v| bounded so the noise-free problem has a finite optimum
  p.soc_constraints.push_back({{conic::AffineScalar(0.0).add(0, 1.0), conic::AffineScalar(0.0).add(1, 1.0)},
                               conic::AffineScalar(0.8)});
  return p;
}

}  // namespace

TEST(DownlinkLmi, ZeroRadiusExactInversion) {
  Rng rng(7);
  const CVec w = random_cvec(3, rng);
  const CVec h = random_cvec(3, rng);
  DownlinkLmiSpec s;
  s.v = CAffine(1.0 / h.dot(w));
  s.w = constant_vec(w);
  s.h_hat = h;
  s.eps = 0.0;
  s.theta_var = 0;
  s.beta_var = 1;
  const LmiBlock blk = downlink_robust_lmi(s);
  for (double theta : {-0.2, 0.0, 0.3}) {
    RVec x(2);
    x << theta, 0.0;
    EXPECT_EQ(min_eig(blk.evaluate(x)) >= -1e-12, theta >= 0.0) << theta;
  }
}

TEST(DownlinkLmi, SolvedBlockMatchesWorstCase) {
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    const DownlinkLmiSpec s = downlink_spec(rng, 0.15);
    const conic::ConicSolution sol = conic::solve(downlink_program(s, false));
    ASSERT_TRUE(sol.optimal()) << sol.message;
    const cplx v = s.v.evaluate(sol.x);
    const CVec w = evaluate(s.w, sol.x);
    const double wc = worst_case_downlink_mse(v, w, s.h_hat, s.eps, 0.0);
    EXPECT_LE(wc, sol.x(2) + 1e-6);
    EXPECT_NEAR(wc, sol.x(2), 1e-5);
    EXPECT_GE(min_eig(downlink_robust_lmi(s).evaluate(sol.x)), -1e-8);
  }
}

TEST(DownlinkLmi, ZeroRadiusDirectFormAgrees) {
  Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    const DownlinkLmiSpec s = downlink_spec(rng, 0.0);
    const conic::ConicSolution a = conic::solve(downlink_program(s, false));
    const conic::ConicSolution b = conic::solve(downlink_program(s, true));
    ASSERT_TRUE(a.optimal() && b.optimal());
    EXPECT_NEAR(a.objective_value, b.objective_value, 1e-6);
  }
}

TEST(RobustBlocks, HermitianAndAffine) {
  Rng rng(10);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10; ++i) {
    UplinkLmiSpec up = uplink_spec(rng, 0.2);
    up.stage = Stage::sparsity;
    up.chi_var = 4;
    UplinkLmiSpec up_z = up;  // z free, b fixed
    up_z.b = CAffine(random_cvec(1, rng)(0));
    up_z.z = variable_vec(5, 4);
    const DownlinkLmiSpec dn = downlink_spec(rng, 0.2);
    DownlinkLmiSpec dn_w = dn;
    dn_w.v = CAffine(random_cvec(1, rng)(0));
    dn_w.w = variable_vec(5, 4);
    for (const LmiBlock& blk :
         {uplink_robust_lmi(up), uplink_robust_lmi(up_z), downlink_robust_lmi(dn), downlink_robust_lmi(dn_w)}) {
      EXPECT_LE(blk.hermitian_defect(), 1e-12);
      RVec theta(13);
      for (int j = 0; j < 13; ++j) theta(j) = g(rng);
      const CMat f0 = blk.evaluate(RVec::Zero(13));
      const CMat f1 = blk.evaluate(theta);
      const CMat f2 = blk.evaluate(2.0 * theta);
      EXPECT_LE((f2 - (2.0 * f1 - f0)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(SProcedure, IdenticalForms) {
  Rng rng(11);
  QuadraticForm f{random_hermitian(3, rng), random_cvec(3, rng), 0.4};
  RVec tau(1);
  tau << 1.0;
  EXPECT_GE(min_eig(s_procedure_lmi(f, f, 0).evaluate(tau)), -1e-12);
}

TEST(SProcedure, NegativeConstant) {
  Rng rng(12);
  QuadraticForm f1{random_hermitian(2, rng), random_cvec(2, rng), 0.1};
  QuadraticForm f2{CMat::Zero(2, 2), CVec::Zero(2), -1.0};
  RVec tau(1);
  tau << 0.0;
  EXPECT_GE(min_eig(s_procedure_lmi(f1, f2, 0).evaluate(tau)), -1e-12);
}

TEST(SProcedure, ImplicationBySampling) {
  Rng rng(13);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int certified = 0;
  for (int i = 0; i < 100; ++i) {
    const int n = dim(rng);
    const double r = 0.3 + u(rng);
    const QuadraticForm f1{CMat::Identity(n, n), CVec::Zero(n), -r * r};  // ball
    const QuadraticForm f2{random_hermitian(n, rng), random_cvec(n, rng, 0.5), -3.0 * u(rng)};
    const LmiMargin mg = lmi_margin(s_procedure_lmi(f1, f2, 0), 1, {0});
    ASSERT_TRUE(mg.solved);
    if (mg.t < -1e-9) continue;
    ++certified;
    for (int s = 0; s < 2000; ++s) {
      const CVec x = ball_point(n, r, rng, s % 2 == 0);
      EXPECT_LE(f2(x), 1e-7);
    }
  }
  EXPECT_GT(certified, 10);
}

TEST(Embedding, Identity) {
  EXPECT_LE((hermitian_to_real(CMat(CMat::Identity(3, 3))) - RMat::Identity(6, 6)).norm(), 0.0);
}

TEST(Embedding, PauliSpectrum) {
  CMat m(2, 2);
  m << 0.0, cplx(0, 1), cplx(0, -1), 0.0;
  Eigen::SelfAdjointEigenSolver<RMat> es(hermitian_to_real(m));
  const RVec ev = es.eigenvalues();
  EXPECT_NEAR(ev(0), -1.0, 1e-12);
  EXPECT_NEAR(ev(1), -1.0, 1e-12);
  EXPECT_NEAR(ev(2), 1.0, 1e-12);
  EXPECT_NEAR(ev(3), 1.0, 1e-12);
}

TEST(Embedding, SpectrumDoubles) {
  Rng rng(14);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int i = 0; i < 100; ++i) {
    const int n = dim(rng);
    const CMat m = random_hermitian(n, rng);
    const RVec ec = Eigen::SelfAdjointEigenSolver<CMat>(m).eigenvalues();
    const RVec er = Eigen::SelfAdjointEigenSolver<RMat>(hermitian_to_real(m)).eigenvalues();
    for (int j = 0; j < n; ++j) {
      EXPECT_NEAR(er(2 * j), ec(j), 1e-10);
      EXPECT_NEAR(er(2 * j + 1), ec(j), 1e-10);
    }
  }
}

TEST(Embedding, RejectsNonHermitianBlock) {
  LmiBlock blk(2, 2);
  blk.constant(0, 1) = 1.0;
  EXPECT_THROW(hermitian_to_real(blk), std::invalid_argument);
}

TEST(ComplexAffine, ProductOfVariablesThrows) {
  EXPECT_THROW(CAffine::variable(0, 1) * CAffine::variable(2, 3), BilinearityError);
  const CAffine p = CAffine::variable(0, 1) * CAffine(cplx(0, 2));
  RVec x(2);
  x << 1.0, 3.0;
  EXPECT_NEAR(std::abs(p.evaluate(x) - cplx(1, 3) * cplx(0, 2)), 0.0, 1e-15);
}
