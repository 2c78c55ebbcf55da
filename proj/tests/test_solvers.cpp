// Copyright 2026 The qkdrate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qkdrate/dual_solver.hpp"
#include "qkdrate/postselection.hpp"
#include "qkdrate/primal_oracle.hpp"
#include "qkdrate/protocols.hpp"

namespace {

using namespace qkdrate;

// Frozen from an independent numpy evaluation of 1 - 2h(Q).
constexpr double kBB84At005 = 0.427206085768;
// Frozen from an independent numpy evaluation of the closed-form six-state rate.
constexpr double kSixStateAt001 = 0.863864852390;
constexpr double kSixStateAt005 = 0.496816268319;

KeyRateProblem normalization_only() {
  KeyRateProblem pr = build_bb84(0.05);
  ConstraintSet cs;
  cs.add(HermitianOperator::identity(4), 1.0);
  pr.constraints = cs;
  pr.hzazb = 0.0;
  return pr;
}

// Qubit Bell state living in the first two levels of a qutrit A, fully
// determined by tomography. A's marginal is rank deficient.
KeyRateProblem embedded_bell_tomography() {
  KeyRateProblem pr;
  pr.dims = {3, 2};
  Vector v = Vector::Zero(6);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  const HermitianOperator rho = HermitianOperator::projector(v);
  for (const auto& b : hermitian_basis(6)) pr.constraints.add(b, rho.dot(b));
  pr.constraints.ensure_normalization();
  pr.keymap = KeyMapPOVM::standard_basis(3).lifted(2);
  pr.witness = rho;
  pr.label = "embedded bell";
  return pr;
}

/// Projector onto the top eigenspace of Z(R(lambda)), normalized.
HermitianOperator top_sigma(const RealVector& lambda, const KeyRateProblem& pr) {
  const HermitianOperator zr = pinch(r_operator(lambda, pr.constraints), pr.keymap);
  const Spectrum s = eigh(zr);
  const Index n = s.values.size();
  const double top = s.values(n - 1);
  Matrix p = Matrix::Zero(n, n);
  int count = 0;
  for (Index k = 0; k < n; ++k)
    if (s.values(k) >= top * (1.0 - 1e-6)) {
      p += s.vectors.col(k) * s.vectors.col(k).adjoint();
      ++count;
    }
  return HermitianOperator::symmetrized(p / static_cast<double>(count));
}

// ---- key_rate_from_theta ---------------------------------------------------

TEST(KeyRateFromTheta, Examples) {
  EXPECT_DOUBLE_EQ(key_rate_from_theta(kLn2, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(key_rate_from_theta(0.0, 0.0), 0.0);
  EXPECT_NEAR(key_rate_from_theta(kLn2, 0.2, 0.5), 0.4, 1e-15);
  EXPECT_EQ(key_rate_from_theta(-1.0, 0.0), 0.0);
}

TEST(KeyRateFor, RetainedFractionRescales) {
  KeyRateProblem pr = build_bb84(0.0);
  pr.retained_fraction = 0.25;
  EXPECT_NEAR(key_rate_for(pr, 0.25 * kLn2), 1.0, 1e-15);
}

// ---- theta_objective -------------------------------------------------------

TEST(ThetaObjective, NormalizationOnlyOptimum) {
  const auto pr = normalization_only();
  EXPECT_NEAR(theta_objective(RealVector::Constant(1, -1.0), pr), 0.0, 1e-15);
  // -e^{-1-l} - l is maximized at l = -1.
  for (double l : {-1.5, -1.1, -0.9, 0.0}) EXPECT_LT(theta_objective(RealVector::Constant(1, l), pr), 0.0);
}

TEST(ThetaObjective, ZeroMultipliers) {
  const auto pr = build_bb84(0.05);
  EXPECT_NEAR(theta_objective(RealVector::Zero(3), pr), -std::exp(-1.0), 1e-15);
  EXPECT_NEAR(theta_objective(RealVector::Zero(3), pr), -0.3679, 1e-4);
}

TEST(ThetaObjective, LargeExponentsStayFinite) {
  const auto pr = normalization_only();
  const double l = -705.0;
  const double v = theta_objective(RealVector::Constant(1, l), pr);
  ASSERT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v / -std::exp(-1.0 - l), 1.0, 1e-12);
}

TEST(ThetaObjective, RejectsWrongMultiplierCount) {
  EXPECT_THROW(theta_objective(RealVector::Zero(2), build_bb84(0.05)), DimensionError);
}

// ---- maximize_theta --------------------------------------------------------

TEST(MaximizeTheta, NormalizationOnly) {
  const auto r = maximize_theta(normalization_only());
  ASSERT_EQ(r.lambda.size(), 1);
  EXPECT_NEAR(r.lambda(0), -1.0, 1e-6);
  EXPECT_NEAR(r.theta, 0.0, 1e-9);
  EXPECT_EQ(r.key_rate, 0.0);
}

TEST(MaximizeTheta, BB84Noiseless) {
  const auto r = maximize_theta(build_bb84(0.0));
  EXPECT_NEAR(r.theta, kLn2, 1e-6);
  EXPECT_NEAR(r.key_rate, 1.0, 1e-6);
}

TEST(MaximizeTheta, BB84FivePercent) {
  const auto r = maximize_theta(build_bb84(0.05));
  EXPECT_NEAR(r.key_rate, kBB84At005, 1e-4);
  EXPECT_NEAR(r.key_rate, 0.4271, 1e-3);
  EXPECT_EQ(r.lambda.size(), 3);
  EXPECT_EQ(r.restarts_used, 8);
  EXPECT_FALSE(r.objective_trace.empty());
}

TEST(MaximizeTheta, SixStateMatchesClosedForm) {
  EXPECT_NEAR(maximize_theta(build_six_state(0.05)).key_rate, kSixStateAt005, 1e-4);
}

TEST(MaximizeTheta, ReportedThetaIsTheObjectiveAtLambda) {
  const auto pr = build_two_mub(3, 0.05);
  const auto r = maximize_theta(pr);
  EXPECT_DOUBLE_EQ(r.theta, theta_objective(r.lambda, pr));
}

TEST(MaximizeTheta, DeterministicForFixedSeed) {
  SolverOptions o;
  o.seed = 99;
  const auto a = maximize_theta(build_rotated(0.2, 0.01, 4), o);
  const auto b = maximize_theta(build_rotated(0.2, 0.01, 4), o);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.best_start, b.best_start);
}

TEST(MaximizeTheta, FiniteDifferenceGradientAgrees) {
  SolverOptions o;
  o.gradient = GradientMode::FiniteDifference;
  const auto pr = build_bb84(0.05);
  EXPECT_NEAR(maximize_theta(pr, o).theta, maximize_theta(pr).theta, 1e-6);
}

TEST(MaximizeTheta, ConstraintScalingLeavesOptimum) {
  const auto pr = build_six_state(0.04);
  KeyRateProblem scaled = pr;
  ConstraintSet cs;
  for (std::size_t i = 0; i < pr.constraints.size(); ++i) {
    const double s = i == 1 ? 7.5 : 1.0;
    cs.add(pr.constraints.op(i) * s, pr.constraints.value(i) * s);
  }
  scaled.constraints = cs;
  EXPECT_NEAR(maximize_theta(scaled).theta, maximize_theta(pr).theta, 1e-6);
}

TEST(MaximizeTheta, WarmStartIsUsed) {
  const auto pr = build_bb84(0.03);
  const auto cold = maximize_theta(pr);
  SolverOptions o;
  o.starts = 1;
  o.warm_starts = {cold.lambda};
  EXPECT_GE(maximize_theta(pr, o).theta, cold.theta - 1e-9);
}

TEST(MaximizeTheta, PostSelectionScalesByPassProbability) {
  const auto pr = build_b92(std::numbers::pi / 2, 0.0);
  const auto r = maximize_theta(pr);
  const auto eff = effective_problem(pr);
  EXPECT_NEAR(r.key_rate, key_rate_from_theta(r.theta, pr.hzazb, *pr.p_pass), 1e-12);
  EXPECT_EQ(r.lambda.size(), static_cast<Index>(eff.constraints.size()));
  EXPECT_GT(r.key_rate, 0.0);
}

TEST(MaximizeTheta, FacialReductionOnRankDeficientMarginal) {
  const auto pr = embedded_bell_tomography();
  const auto r = maximize_theta(pr);
  EXPECT_NEAR(r.theta, kLn2, 1e-3);
  EXPECT_LE(r.theta, kLn2 + 1e-9);
}

TEST(MaximizeTheta, InconsistentConstraintsRejected) {
  KeyRateProblem pr = build_bb84(0.05);
  ConstraintSet cs = pr.constraints;
  cs.add(pr.constraints.op(1), pr.constraints.value(1) + 0.1);
  pr.constraints = cs;
  EXPECT_THROW(maximize_theta(pr), InfeasibleError);
}

TEST(MaximizeTheta, B92PostselectionPathsAgree) {
  for (double theta : {1.0, std::numbers::pi / 2}) {
    const auto pr = build_b92(theta, 0.02);
    const double a = maximize_theta(effective_problem(pr, PostselectPath::Invertible)).key_rate;
    const double b = maximize_theta(effective_problem(pr, PostselectPath::General)).key_rate;
    EXPECT_NEAR(a, b, 1e-6) << "theta " << theta;
  }
}

TEST(MaximizeTheta, SixStateSplitConstraintsAddNothing) {
  const double q = 0.06;
  const auto merged = build_six_state(q);
  KeyRateProblem split = merged;
  const auto bases = mub_family(2, 3);
  ConstraintSet cs;
  cs.add(HermitianOperator::identity(4), 1.0);
  cs.add(error_operator(bases[1], conjugate_basis(bases[1]), true), q);
  cs.add(error_operator(bases[2], conjugate_basis(bases[2]), true), q);
  cs.add(error_operator(bases[0], bases[0], true), q);
  ASSERT_LT(cs.max_residual(*merged.witness), 1e-12);
  split.constraints = cs;
  EXPECT_NEAR(maximize_theta(split).key_rate, maximize_theta(merged).key_rate, 1e-6);
}

TEST(MaximizeTheta, RotatedHierarchyIsMonotone) {
  double prev = 0.0;
  for (int level = 1; level <= 4; ++level) {
    const double k = maximize_theta(build_rotated(0.25, 0.01, level)).key_rate;
    EXPECT_GE(k, prev - 1e-6) << "level " << level;
    prev = k;
  }
}

TEST(MaximizeTheta, MdiNoiseless) {
  const auto r = maximize_theta(build_mdi_bb84(0.0));
  // Below 1 only through the error-correction cost of mismatched bases.
  EXPECT_GT(r.key_rate, 0.9);
  EXPECT_LE(r.key_rate, 1.0 + 1e-9);
  EXPECT_NEAR(r.theta / 0.25, kLn2, 1e-3);
}

TEST(MaximizeTheta, MdiAnnouncementDecoherenceChangesNothing) {
  const auto pr = build_mdi_bb84(0.05);
  KeyRateProblem decohered = pr;
  const Matrix flip = (Matrix(2, 2) << 0, 1, 1, 0).finished();
  const Matrix phase = (Matrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
  for (const auto& h : hermitian_basis(16)) {
    decohered.constraints.add(HermitianOperator(kron(h.matrix(), flip)), 0.0);
    decohered.constraints.add(HermitianOperator(kron(h.matrix(), phase)), 0.0);
  }
  ASSERT_LT(decohered.constraints.max_residual(*pr.witness), 1e-12);
  EXPECT_NEAR(maximize_theta(decohered).theta, maximize_theta(pr).theta, 1e-4);
}

// ---- primal oracle ---------------------------------------------------------

TEST(SolvePrimal, BellTomographyIsOneBit) {
  KeyRateProblem pr = build_bb84(0.0);
  const HermitianOperator rho = pure_state(max_entangled(2));
  ConstraintSet cs;
  for (const auto& b : hermitian_basis(4)) cs.add(b, rho.dot(b));
  cs.ensure_normalization();
  pr.constraints = cs;
  pr.witness = rho;
  const auto r = solve_primal(pr);
  // A pure state has no strictly feasible point, so the default 1e-5
  // perturbation applies; its Fannes envelope at d = 4 is about 1.3e-3.
  EXPECT_GT(r.eps_used, 0.0);
  EXPECT_NEAR(r.value, 1.0, 1e-3);
}

TEST(SolvePrimal, BB84MatchesTheory) {
  const auto pr = build_bb84(0.05);
  const auto r = solve_primal(pr);
  EXPECT_NEAR(primal_key_rate(pr, r), kBB84At005, 1e-3);
  EXPECT_TRUE(is_psd(r.rho_star, 1e-8));
  EXPECT_LT(r.feasibility_residual, 1e-6);
  EXPECT_LT(pr.constraints.max_residual(r.rho_star), 1e-4);
}

TEST(SolvePrimal, SixStateTightAgainstDual) {
  const auto pr = build_six_state(0.01);
  const double kp = primal_key_rate(pr, solve_primal(pr));
  const double kd = maximize_theta(pr).key_rate;
  EXPECT_NEAR(kp, kSixStateAt001, 1e-3);
  EXPECT_LT(std::abs(kp - kd), 1e-3);
  EXPECT_LE(kd, kp + 1e-5);
}

TEST(SolvePrimal, B92GapAtBestAngle) {
  const auto pr = build_b92(std::numbers::pi / 2, 0.06);
  const double kp = primal_key_rate(pr, solve_primal(pr));
  const double kd = maximize_theta(pr).key_rate;
  EXPECT_GT(kp, kd);
  EXPECT_GT(kp, 0.0);
}

TEST(SolvePrimal, FacialReductionOnRankDeficientMarginal) {
  const auto pr = embedded_bell_tomography();
  const auto r = solve_primal(pr);
  EXPECT_NEAR(r.value, 1.0, 1e-3);
  EXPECT_EQ(r.rho_star.dim(), 6);
}

TEST(PerturbConstraints, Examples) {
  const auto pr = build_bb84(0.0);
  const ConstraintSet same = perturb_constraints(pr.constraints, 0.0);
  for (std::size_t i = 0; i < pr.constraints.size(); ++i) EXPECT_EQ(same.value(i), pr.constraints.value(i));
  const ConstraintSet p = perturb_constraints(pr.constraints, 0.01);
  EXPECT_NEAR(p.value(0), 1.0, 1e-15);
  EXPECT_NEAR(perturb_constraints(pr.constraints, 0.001).value(2), 0.002, 1e-15);
  EXPECT_THROW(perturb_constraints(pr.constraints, 0.25), DomainError);
  EXPECT_THROW(perturb_constraints(pr.constraints, -0.01), DomainError);
}

TEST(PerturbationConvergence, BB84WithinFannesEnvelope) {
  const auto pr = build_bb84(0.05);
  const std::vector<double> eps = {1e-2, 1e-3, 1e-4};
  const auto v = perturbation_convergence_check(pr, eps);
  ASSERT_EQ(v.size(), 3u);
  const double d = 4.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double de = d * eps[i];
    const double envelope = 2.0 * (de * std::log2(d) - de * std::log2(de));
    EXPECT_LE(std::abs(v[i] - v.back()), envelope) << "eps " << eps[i];
  }
}

TEST(PerturbationConvergence, TomographicLimitIsWitnessCoherence) {
  KeyRateProblem pr = build_bb84(0.0);
  const HermitianOperator rho = noisy_max_entangled(2, 0.1);
  ConstraintSet cs;
  for (const auto& b : hermitian_basis(4)) cs.add(b, rho.dot(b));
  cs.ensure_normalization();
  pr.constraints = cs;
  pr.witness = rho;
  const auto v = perturbation_convergence_check(pr, {1e-2, 1e-3, 1e-4});
  const double target = coherence(rho, pr.keymap);
  EXPECT_LT(std::abs(v[2] - target), std::abs(v[0] - target) + 1e-9);
  EXPECT_NEAR(v[2], target, 1e-3);
}

TEST(PerturbationConvergence, SixStateAgainstDual) {
  const auto pr = build_six_state(0.01);
  OracleOptions o;
  o.force_eps = 1e-4;
  const double kp = primal_key_rate(pr, solve_primal(pr, o));
  EXPECT_LT(std::abs(kp - maximize_theta(pr).key_rate), 1e-3);
}

TEST(PerturbationConvergence, RejectsIncreasingList) {
  EXPECT_THROW(perturbation_convergence_check(build_bb84(0.05), {1e-4, 1e-3}), DomainError);
}

// ---- Golden-Thompson saturation -------------------------------------------

TEST(GoldenThompson, SaturatedForBB84) {
  const auto pr = build_bb84(0.05);
  const auto r = maximize_theta(pr);
  const HermitianOperator q = -HermitianOperator::identity(4) - weighted_sum(r.lambda, pr.constraints);
  const HermitianOperator zs = pinch(top_sigma(r.lambda, pr), pr.keymap);
  EXPECT_LT(commutator_norm(q.matrix(), zs.matrix()), 1e-6);
}

TEST(GoldenThompson, NotSaturatedForB92) {
  const auto eff = effective_problem(build_b92(std::numbers::pi / 2, 0.02));
  const auto r = maximize_theta(eff);
  ASSERT_GT(r.key_rate, 0.0);
  const HermitianOperator q = -HermitianOperator::identity(4) - weighted_sum(r.lambda, eff.constraints);
  const HermitianOperator zs = pinch(top_sigma(r.lambda, eff), eff.keymap);
  EXPECT_GT(commutator_norm(q.matrix(), zs.matrix()), 1e-3);
}

}  // namespace
