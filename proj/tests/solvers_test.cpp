#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unijac/generators.hpp"
#include "unijac/solvers.hpp"

using namespace unijac;
using namespace unijac::testing;

namespace {

ComplexMatrix random_skew(Index n, std::mt19937_64& rng) {
  return skew(random_matrix(n, n, rng));
}

void expect_unitary(const SolveResult& res) {
  for (const auto& u : res.factors) EXPECT_LE(unitarity_error(u), 1e-8);
}

void expect_monotone(const SolveResult& res, double f0) {
  double prev = f0;
  for (const auto& r : res.records) {
    EXPECT_GE(r.f, prev - 1e-12 * (1.0 + std::abs(prev))) << "record " << r.k;
    prev = r.f;
  }
}

}  // namespace

TEST(PairSelection, SingleEntry) {
  ComplexMatrix l = ComplexMatrix::Zero(3, 3);
  l(0, 1) = Complex(0.5, -1.0);
  l(1, 0) = -std::conj(l(0, 1));
  const auto pc = select_pair_gradient({ComplexMatrix::Zero(2, 2), l});
  ASSERT_TRUE(pc.has_value());
  EXPECT_EQ(pc->p, 1u);
  EXPECT_EQ(pc->i, 0u);
  EXPECT_EQ(pc->j, 1u);
}

TEST(PairSelection, TieGoesToFirstPair) {
  ComplexMatrix l = ComplexMatrix::Zero(3, 3);
  l(0, 1) = 1.0;
  l(1, 0) = -1.0;
  l(0, 2) = Complex(0.0, 1.0);
  l(2, 0) = Complex(0.0, 1.0);
  const auto pc = select_pair_gradient({l});
  ASSERT_TRUE(pc.has_value());
  EXPECT_EQ(pc->i, 0u);
  EXPECT_EQ(pc->j, 1u);
}

TEST(PairSelection, ZeroFieldSignalsStationarity) {
  EXPECT_FALSE(select_pair_gradient({ComplexMatrix::Zero(3, 3)}).has_value());
}

TEST(PairSelection, DeltaInequalityOnRandomFields) {
  std::mt19937_64 rng(70);
  std::uniform_int_distribution<int> nd(2, 7), dd(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = dd(rng);
    std::vector<ComplexMatrix> ls;
    Index nmax = 0;
    double total2 = 0.0;
    for (Index p = 0; p < d; ++p) {
      const Index n = nd(rng);
      nmax = std::max(nmax, n);
      ls.push_back(random_skew(n, rng));
      total2 += ls.back().squaredNorm();
    }
    const auto pc = select_pair_gradient(ls);
    ASSERT_TRUE(pc.has_value());
    const double delta = delta_bound_multi(d, nmax);
    EXPECT_GE(pc->sub_norm, delta * std::sqrt(total2));
    // Exhaustive check that nothing larger exists.
    for (Index p = 0; p < d; ++p)
      for (Index i = 0; i + 1 < static_cast<Index>(ls[p].rows()); ++i)
        for (Index j = i + 1; j < static_cast<Index>(ls[p].rows()); ++j)
          EXPECT_LE(pair_block_norm(ls[p], i, j), pc->sub_norm);
  }
}

TEST(CyclicSelector, SingleModeOrderAndWrap) {
  CyclicSelector sel({3});
  const std::pair<Index, Index> want[] = {{0, 1}, {0, 2}, {1, 2}, {0, 1}, {0, 2}};
  for (auto [i, j] : want) {
    const PairChoice c = sel.next();
    EXPECT_EQ(c.p, 0u);
    EXPECT_EQ(c.i, i);
    EXPECT_EQ(c.j, j);
  }
}

TEST(CyclicSelector, ModesAlternateWithOwnCursors) {
  CyclicSelector sel({3, 4});
  const PairChoice a = sel.next(), b = sel.next(), c = sel.next(), e = sel.next();
  EXPECT_EQ(a.p, 0u);
  EXPECT_EQ(b.p, 1u);
  EXPECT_EQ(c.p, 0u);
  EXPECT_EQ(e.p, 1u);
  EXPECT_EQ(std::make_pair(c.i, c.j), std::make_pair(Index{0}, Index{2}));
  EXPECT_EQ(std::make_pair(e.i, e.j), std::make_pair(Index{0}, Index{2}));
  CyclicSelector skip({1, 2});
  EXPECT_EQ(skip.next().p, 1u);
  EXPECT_EQ(skip.next().p, 1u);
}

TEST(DeltaBounds, DefaultsSitBelowTheBound) {
  EXPECT_DOUBLE_EQ(delta_bound_multi(3, 3), std::sqrt(2.0 / 18.0));
  EXPECT_DOUBLE_EQ(delta_bound_single(4), std::sqrt(2.0) / 4.0);
  const SolveResult r = jacobi_mg(reference_problem(), {});
  EXPECT_LE(r.delta, delta_bound_multi(3, 3));
  EXPECT_GT(r.delta, delta_bound_multi(3, 3) - 1e-14);
  SolverConfig bad;
  bad.delta = 1.0;
  EXPECT_THROW(jacobi_mg(reference_problem(), bad), std::invalid_argument);
}

TEST(Jacobi, DiagonalStartTakesNoSteps) {
  GeneratorSpec g;
  g.dims = {3, 3, 3};
  g.noise = 0.0;
  g.real = true;
  Instance inst = generate(g);
  ProblemSpec spec = inst.spec;
  for (auto& a : spec.tensors) {
    for (Index p = 0; p < 3; ++p) a = mode_product(a, inst.truth[p].adjoint(), p);
  }
  for (const char* name : {"jacobi-mg", "jacobi-mc", "jacobi-mgp", "baseline-rsd"}) {
    const SolveResult r = run_solver(name, spec, {});
    EXPECT_EQ(r.iterations, 0) << name;
    EXPECT_EQ(r.status, SolveStatus::GradConverged) << name;
  }
}

TEST(Jacobi, ReferenceTensorReachesKnownOptimum) {
  const ProblemSpec spec = reference_problem();
  const double norm2 = frobenius_norm_sq(spec.tensors[0]);
  EXPECT_NEAR(per_ratio(spec.tensors[0]), 0.0807, 5e-5);
  for (const char* name : {"jacobi-mg", "jacobi-mc"}) {
    const SolveResult r = run_solver(name, spec, {});
    EXPECT_EQ(r.status, SolveStatus::GradConverged) << name;
    EXPECT_LE(r.grad_norm, 1e-5);
    EXPECT_NEAR(per_ratio(r.W[0]), 0.9492, 5e-4) << name;
    EXPECT_NEAR(norm2 - r.value, 61.749, 0.05) << name;
    EXPECT_LE(r.sweeps, 30.0) << name;
    expect_monotone(r, objective_value(spec, identity_tuple(spec)));
    expect_unitary(r);
  }
  const SolveResult rsd = baseline_rsd(spec, {});
  EXPECT_NEAR(norm2 - rsd.value, 61.749, 1e-2);
}

TEST(Jacobi, DescentInequalityAndStepIdentity) {
  std::mt19937_64 rng(71);
  for (Family fam : {Family::Jatd, Family::Jatc}) {
    for (Dagger dag : {Dagger::ConjTranspose, Dagger::Transpose}) {
      const std::vector<Index> ranks =
          fam == Family::Jatc ? std::vector<Index>{2, 3, 2} : std::vector<Index>{3};
      ProblemSpec spec = random_problem(fam, dag, rng, {4, 4, 3}, ranks, 2);
      spec.weights.clear();
      SolverConfig cfg;
      cfg.max_iter = 300;
      const SolveResult r = jacobi_mg(spec, cfg);
      for (const auto& rec : r.records) {
        if (rec.skipped) continue;
        EXPECT_GE(rec.slack, -1e-12 * (1.0 + std::abs(rec.f)));
        // 2 sqrt(1 - cos t) written without cancellation.
        const double want = 2.0 * std::sqrt(2.0) * std::sin(0.5 * rec.theta);
        EXPECT_NEAR(rec.step_norm, want, 1e-12 * want);
      }
      expect_monotone(r, objective_value(spec, identity_tuple(spec)));
      expect_unitary(r);
    }
  }
}

TEST(Jacobi, JatcVariantsAgree) {
  GeneratorSpec g;
  g.kind = GeneratorKind::RandomDense;
  g.family = Family::Jatc;
  g.dims = {5, 5, 5};
  g.ranks = {3, 3, 4};
  g.seed = 3;
  const ProblemSpec spec = generate(g).spec;
  SolverConfig cfg;
  cfg.max_iter = 20000;
  const SolveResult mg = jacobi_mg(spec, cfg);
  const SolveResult mc = jacobi_mc(spec, cfg);
  EXPECT_EQ(mg.status, SolveStatus::GradConverged);
  EXPECT_EQ(mc.status, SolveStatus::GradConverged);
  expect_unitary(mg);
  expect_unitary(mc);
  if (std::abs(mg.value - mc.value) > 1e-4 * mg.value) {
    // Both stationary but at different points: allowed, flagged.
    std::cout << "note: stationary values differ: " << mg.value << " vs " << mc.value << '\n';
  }
  EXPECT_GT(mg.value, objective_value(spec, identity_tuple(spec)));
}

TEST(Jacobi, JatdVariantsAgreeOnNearDiagonalInstance) {
  GeneratorSpec g;
  g.dims = {4, 4, 4};
  g.noise = 0.5;
  g.seed = 11;
  const ProblemSpec spec = generate(g).spec;
  SolverConfig cfg;
  cfg.max_iter = 20000;
  const SolveResult mg = jacobi_mg(spec, cfg);
  const SolveResult mc = jacobi_mc(spec, cfg);
  EXPECT_EQ(mg.status, SolveStatus::GradConverged);
  EXPECT_EQ(mc.status, SolveStatus::GradConverged);
  EXPECT_NEAR(mg.value, mc.value, 1e-4 * mg.value);
}

TEST(Jacobi, TraceMaxSingleFactor) {
  std::mt19937_64 rng(72);
  for (Dagger dag : {Dagger::ConjTranspose, Dagger::Transpose}) {
    ProblemSpec spec = random_problem(Family::TraceMax, dag, rng, {5, 5}, {3}, 1);
    SolverConfig cfg;
    cfg.max_iter = 5000;
    const SolveResult r = jacobi_g(spec, cfg);
    EXPECT_EQ(r.status, SolveStatus::GradConverged);
    for (const auto& rec : r.records) {
      if (!rec.skipped) {
        EXPECT_GE(rec.slack, -1e-12 * (1.0 + std::abs(rec.f)));
      }
    }
    expect_unitary(r);
    if (dag == Dagger::ConjTranspose) {
      // Hermitian B: the optimum is the sum of the top three eigenvalues.
      const ComplexMatrix b = spec.tensors[0].to_matrix();
      const Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(b);
      const double top = es.eigenvalues().tail(3).sum();
      EXPECT_LE(r.value, top + 1e-8);
    }
  }
  EXPECT_THROW(jacobi_g(reference_problem(), {}), std::invalid_argument);
}

TEST(Jacobi, SymmetricProblemIsMonotone) {
  std::mt19937_64 rng(73);
  ProblemSpec spec = random_problem(Family::JatdSymmetric, Dagger::ConjTranspose, rng, {4, 4, 4}, {4}, 2);
  SolverConfig cfg;
  cfg.max_iter = 200;
  const SolveResult r = jacobi_g(spec, cfg);
  expect_monotone(r, objective_value(spec, identity_tuple(spec)));
  expect_unitary(r);
}

TEST(Proximal, ZeroEpsilonMatchesPlainRun) {
  std::mt19937_64 rng(74);
  ProblemSpec spec = random_problem(Family::TraceMax, Dagger::ConjTranspose, rng, {4, 4}, {2}, 1);
  SolverConfig cfg;
  cfg.epsilon = 0.0;
  cfg.random_start = true;
  cfg.seed = 5;
  const SolveResult a = jacobi_g(spec, cfg);
  const SolveResult b = jacobi_gp(spec, cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  EXPECT_EQ(a.value, b.value);
}

TEST(Proximal, GainBoundEveryStep) {
  std::mt19937_64 rng(75);
  for (Family fam : {Family::Jatd, Family::Jatc}) {
    const std::vector<Index> ranks =
        fam == Family::Jatc ? std::vector<Index>{2, 2, 3} : std::vector<Index>{3};
    ProblemSpec spec = random_problem(fam, Dagger::ConjTranspose, rng, {3, 4, 4}, ranks, 2);
    SolverConfig cfg;
    cfg.epsilon = 1e-3;
    cfg.max_iter = 300;
    const SolveResult r = jacobi_mgp(spec, cfg);
    ASSERT_FALSE(r.records.empty());
    for (const auto& rec : r.records) {
      if (!rec.skipped) {
        EXPECT_GE(rec.prox_slack, -1e-12 * (1.0 + std::abs(rec.f)));
      }
    }
    expect_monotone(r, objective_value(spec, identity_tuple(spec)));
  }
}

TEST(Proximal, SymmetricJointDiagonalization) {
  GeneratorSpec g;
  g.dims = {10, 10, 10};
  g.L = 5;
  g.noise = 0.1;
  g.diagonal = DiagonalProfile::TensorIndex;
  g.symmetric = true;
  g.real = true;
  g.seed = 2;
  const ProblemSpec spec = generate(g).spec;
  SolverConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.max_iter = 20000;
  const SolveResult r = jacobi_gp(spec, cfg);
  EXPECT_EQ(r.status, SolveStatus::GradConverged);
  EXPECT_LE(r.grad_norm, 1e-5);
  for (const auto& rec : r.records) {
    if (!rec.skipped) {
      EXPECT_GE(rec.prox_slack, -1e-10 * (1.0 + std::abs(rec.f)));
    }
  }
  expect_unitary(r);
}

TEST(Baseline, MonotoneAscent) {
  std::mt19937_64 rng(76);
  ProblemSpec spec = random_problem(Family::Jatd, Dagger::Transpose, rng, {3, 3, 3}, {2}, 2);
  SolverConfig cfg;
  cfg.max_iter = 200;
  const SolveResult r = baseline_rsd(spec, cfg);
  expect_monotone(r, objective_value(spec, identity_tuple(spec)));
  for (const auto& rec : r.records) EXPECT_GT(rec.slack, 0.0);
  expect_unitary(r);
}

TEST(RunSolver, UnknownNameThrows) {
  EXPECT_THROW(run_solver("newton", reference_problem(), {}), std::invalid_argument);
}
