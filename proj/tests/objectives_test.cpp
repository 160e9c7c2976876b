#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unijac/generators.hpp"
#include "unijac/objectives.hpp"
#include "unijac/subproblem.hpp"

using namespace unijac;
using namespace unijac::testing;

namespace {

const Dagger kDaggers[] = {Dagger::ConjTranspose, Dagger::Transpose};

double rel_err(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

DenseTensor diagonal_tensor(std::vector<Index> dims, std::vector<Complex> diag) {
  DenseTensor t(dims);
  std::vector<Index> idx(dims.size());
  for (Index q = 0; q < diag.size(); ++q) {
    std::fill(idx.begin(), idx.end(), q);
    t.at(idx) = diag[q];
  }
  return t;
}

}  // namespace

TEST(EvalHposm, IdentityBlocksGiveRank) {
  ProblemSpec spec;
  spec.family = Family::TraceMax;
  spec.tensors = {DenseTensor::from_matrix(ComplexMatrix::Identity(4, 4))};
  spec.ranks = {3};
  EXPECT_NEAR(eval_hposm(spec, ComplexMatrix::Identity(4, 4)), 3.0, 1e-14);
}

TEST(EvalHposm, MatchesNaiveLoopOnOrderFour) {
  std::mt19937_64 rng(21);
  for (Dagger dag : kDaggers) {
    ProblemSpec spec = random_problem(Family::TraceMax, dag, rng, {2, 2, 2, 2}, {2}, 1);
    const ComplexMatrix u = haar_unitary(2, rng);
    const DenseTensor& b = spec.tensors[0];
    Complex total{};
    for (Index q = 0; q < 2; ++q) {
      auto v = [&](Index k) { return dag == Dagger::ConjTranspose ? u(k, q) : std::conj(u(k, q)); };
      for (Index a = 0; a < 2; ++a)
        for (Index bb = 0; bb < 2; ++bb)
          for (Index c = 0; c < 2; ++c)
            for (Index d = 0; d < 2; ++d)
              total += b.at({a, bb, c, d}) * std::conj(v(a)) * std::conj(v(bb)) * v(c) * v(d);
    }
    EXPECT_NEAR(eval_hposm(spec, u), total.real(), 1e-12);
    EXPECT_LT(std::abs(total.imag()), 1e-12);
  }
}

TEST(EvalHposm, RejectsNonHermitian) {
  ProblemSpec spec;
  spec.family = Family::TraceMax;
  ComplexMatrix b = ComplexMatrix::Zero(2, 2);
  b(0, 1) = 1.0;
  spec.tensors = {DenseTensor::from_matrix(b)};
  EXPECT_THROW(eval_hposm(spec, ComplexMatrix::Identity(2, 2)), std::invalid_argument);
}

TEST(EvalHposm, GammaOneMatchesTransformedTrace) {
  std::mt19937_64 rng(22);
  for (Dagger dag : kDaggers) {
    ProblemSpec spec = random_problem(Family::TraceMax, dag, rng, {5, 5}, {3}, 3);
    const ComplexMatrix u = haar_unitary(5, rng);
    EXPECT_NEAR(eval_hposm(spec, u), evaluate(spec, {u}).value, 1e-11);
  }
}

TEST(EvalJatd, DiagonalTensorAtIdentity) {
  ProblemSpec spec;
  spec.family = Family::Jatd;
  spec.tensors = {diagonal_tensor({3, 3, 3}, {Complex(1, 1), 2.0, Complex(0, -3)})};
  spec.ranks = {3};
  EXPECT_NEAR(eval_jatd(spec, identity_tuple(spec)).value, 2.0 + 4.0 + 9.0, 1e-14);
}

TEST(EvalJatd, ReferenceTensorAtIdentity) {
  const ProblemSpec spec = reference_problem();
  EXPECT_NEAR(eval_jatd(spec, identity_tuple(spec)).value, 98.0, 1e-12);
}

TEST(EvalJatd, ScaleInvariance) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  for (Family fam : {Family::Jatd, Family::Jatc, Family::JatdSymmetric, Family::TraceMax}) {
    for (Dagger dag : kDaggers) {
      std::vector<Index> dims = fam == Family::Jatc ? std::vector<Index>{3, 4, 3}
                              : fam == Family::TraceMax ? std::vector<Index>{4, 4}
                                                        : std::vector<Index>{3, 3, 3};
      std::vector<Index> ranks = fam == Family::Jatc ? std::vector<Index>{2, 3, 2}
                                                     : std::vector<Index>{2};
      ProblemSpec spec = random_problem(fam, dag, rng, dims, ranks, 2);
      UnitaryTuple ups = random_tuple(spec, rng);
      const double f0 = objective_value(spec, ups);
      for (auto& u : ups) {
        ComplexMatrix r = ComplexMatrix::Zero(u.cols(), u.cols());
        for (Eigen::Index k = 0; k < u.cols(); ++k) r(k, k) = std::polar(1.0, ang(rng));
        u = u * r;
      }
      EXPECT_NEAR(objective_value(spec, ups), f0, 1e-10 * std::max(1.0, std::abs(f0)))
          << to_string(fam);
    }
  }
}

TEST(EvalJatc, FullRanksGiveWeightedNorm) {
  std::mt19937_64 rng(24);
  ProblemSpec spec = random_problem(Family::Jatc, Dagger::ConjTranspose, rng, {3, 2, 4}, {3, 2, 4});
  double want = 0.0;
  for (Index l = 0; l < spec.tensors.size(); ++l) want += spec.weight(l) * frobenius_norm_sq(spec.tensors[l]);
  EXPECT_NEAR(eval_jatc(spec, random_tuple(spec, rng)).value, want, 1e-10 * want);
}

TEST(EvalJatc, ZeroTensorAndSubtensorOracle) {
  ProblemSpec zero;
  zero.family = Family::Jatc;
  zero.tensors = {DenseTensor({3, 3, 3})};
  zero.ranks = {2, 2, 2};
  EXPECT_EQ(eval_jatc(zero, identity_tuple(zero)).value, 0.0);

  std::mt19937_64 rng(25);
  ProblemSpec spec = random_problem(Family::Jatc, Dagger::ConjTranspose, rng, {3, 3, 3}, {2, 2, 2}, 1);
  spec.weights.clear();
  const std::vector<Index> r{2, 2, 2};
  EXPECT_NEAR(eval_jatc(spec, identity_tuple(spec)).value,
              frobenius_norm_sq(subtensor(spec.tensors[0], r)), 1e-12);
}

TEST(EvalJatc, MonotoneInRanks) {
  std::mt19937_64 rng(26);
  ProblemSpec small = random_problem(Family::Jatc, Dagger::Transpose, rng, {4, 3, 4}, {2, 2, 3});
  ProblemSpec big = small;
  big.ranks = {3, 2, 4};
  const UnitaryTuple ups = random_tuple(small, rng);
  EXPECT_LE(eval_jatc(small, ups).value, eval_jatc(big, ups).value);
}

TEST(PerRatio, Examples) {
  EXPECT_NEAR(per_ratio(reference_tensor()), 98.0 / 1215.0, 1e-15);
  EXPECT_NEAR(per_ratio(reference_tensor()), 0.0807, 5e-5);
  EXPECT_DOUBLE_EQ(per_ratio(diagonal_tensor({3, 3}, {1.0, 2.0, 3.0})), 1.0);
  EXPECT_DOUBLE_EQ(per_ratio(DenseTensor::from_matrix(ComplexMatrix::Ones(2, 2))), 0.5);
  EXPECT_THROW(per_ratio(DenseTensor({2, 2})), std::invalid_argument);
}

TEST(ProblemSpec, Validation) {
  std::mt19937_64 rng(27);
  ProblemSpec spec = random_problem(Family::Jatd, Dagger::ConjTranspose, rng, {3, 4, 3}, {3});
  EXPECT_NO_THROW(spec.validate());
  spec.ranks = {4};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.ranks = {2, 3, 2};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.ranks = {2};
  spec.weights = {1.0, -1.0};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  ProblemSpec sym = random_problem(Family::JatdSymmetric, Dagger::ConjTranspose, rng, {3, 4, 3}, {2});
  EXPECT_THROW(sym.validate(), std::invalid_argument);
}

TEST(HermitianLift, SymmetricDiagonalizationMatchesHposm) {
  std::mt19937_64 rng(28);
  for (Dagger dag : kDaggers) {
    for (Index d : {Index{2}, Index{3}}) {
      ProblemSpec spec = random_problem(Family::JatdSymmetric, dag, rng, std::vector<Index>(d, 3), {2});
      const ProblemSpec lift = hermitian_lift(spec);
      EXPECT_TRUE(is_hermitian_tensor(lift.tensors[0], d, 1e-12));
      const ComplexMatrix u = haar_unitary(3, rng);
      const double a = eval_jatd(spec, {u}).value;
      EXPECT_NEAR(eval_hposm(lift, u), a, 1e-10 * std::max(1.0, a));
    }
  }
}

TEST(EuclidGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  struct Case {
    Family fam;
    std::vector<Index> dims;
    std::vector<Index> ranks;
  };
  const std::vector<Case> cases = {
      {Family::Jatd, {3, 4, 3}, {2}},
      {Family::Jatd, {3, 3, 3}, {3}},
      {Family::Jatc, {3, 4, 3}, {2, 3, 1}},
      {Family::JatdSymmetric, {3, 3, 3}, {2}},
      {Family::JatdSymmetric, {4, 4}, {4}},
      {Family::TraceMax, {4, 4}, {3}},
  };
  for (const auto& c : cases) {
    for (Dagger dag : kDaggers) {
      ProblemSpec spec = random_problem(c.fam, dag, rng, c.dims, c.ranks, 2);
      UnitaryTuple ups = random_tuple(spec, rng);
      for (Index p = 0; p < spec.num_factors(); ++p) {
        const ComplexMatrix an = euclid_grad_mode(spec, ups, p);
        const ComplexMatrix fd = fd_wirtinger(
            [&](const ComplexMatrix& x) {
              UnitaryTuple v = ups;
              v[p] = x;
              return objective_value(spec, v);
            },
            ups[p]);
        EXPECT_LT(rel_err(an, fd), 1e-6) << to_string(c.fam) << " dagger " << to_string(dag);
      }
    }
  }
}

TEST(EuclidGrad, RectangularFactors) {
  std::mt19937_64 rng(30);
  for (Dagger dag : kDaggers) {
    ProblemSpec spec = random_problem(Family::Jatc, dag, rng, {4, 3, 4}, {2, 2, 3}, 1);
    UnitaryTuple xs;
    for (Index p = 0; p < 3; ++p) {
      xs.push_back(q_factor(random_matrix(spec.factor_dim(p), spec.rank(p), rng)));
    }
    for (Index p = 0; p < 3; ++p) {
      const ComplexMatrix fd = fd_wirtinger(
          [&](const ComplexMatrix& x) {
            UnitaryTuple v = xs;
            v[p] = x;
            return objective_value(spec, v);
          },
          xs[p]);
      EXPECT_LT(rel_err(euclid_grad_mode(spec, xs, p), fd), 1e-6);
    }
  }
}

TEST(LambdaField, AgreesWithProjectedEuclideanGradient) {
  std::mt19937_64 rng(31);
  for (Family fam : {Family::Jatd, Family::Jatc, Family::JatdSymmetric, Family::TraceMax}) {
    for (Dagger dag : kDaggers) {
      std::vector<Index> dims = fam == Family::TraceMax ? std::vector<Index>{4, 4}
                                                        : std::vector<Index>{4, 4, 4};
      std::vector<Index> ranks = fam == Family::Jatc ? std::vector<Index>{2, 3, 3}
                                                     : std::vector<Index>{3};
      ProblemSpec spec = random_problem(fam, dag, rng, dims, ranks, 2);
      const UnitaryTuple ups = random_tuple(spec, rng);
      for (Index p = 0; p < spec.num_factors(); ++p) {
        const ComplexMatrix lam = lambda_field(spec, ups, p);
        const auto rg = riemannian_grad_unitary(euclid_grad_mode(spec, ups, p), ups[p]);
        EXPECT_LT(rel_err(lam, rg.lambda), 1e-10);
        EXPECT_LT((lam + lam.adjoint()).norm(), 1e-12 * std::max(1.0, lam.norm()));
        // Pairs outside the optimized block do not move the objective.
        const Index r = spec.rank(p);
        for (Index i = r; i < spec.factor_dim(p); ++i)
          for (Index j = r; j < spec.factor_dim(p); ++j) EXPECT_EQ(lam(i, j), Complex(0.0));
      }
    }
  }
}

TEST(LambdaField, DiagonalTensorsAtIdentityVanish) {
  ProblemSpec spec;
  spec.family = Family::Jatd;
  spec.tensors = {diagonal_tensor({3, 3, 3}, {3.0, Complex(1, 2), 0.5})};
  spec.ranks = {3};
  for (Index p = 0; p < 3; ++p) EXPECT_EQ(lambda_field(spec, identity_tuple(spec), p).norm(), 0.0);
}

TEST(LambdaField, BlockIsGradientOfElementaryFunction) {
  std::mt19937_64 rng(32);
  for (Family fam : {Family::Jatd, Family::Jatc, Family::JatdSymmetric, Family::TraceMax}) {
    for (Dagger dag : kDaggers) {
      std::vector<Index> dims = fam == Family::TraceMax ? std::vector<Index>{4, 4}
                                                        : std::vector<Index>{4, 3, 4};
      if (fam == Family::JatdSymmetric) dims = {4, 4, 4};
      std::vector<Index> ranks = fam == Family::Jatc ? std::vector<Index>{2, 2, 3}
                                                     : std::vector<Index>{3};
      ProblemSpec spec = random_problem(fam, dag, rng, dims, ranks, 2);
      const UnitaryTuple ups = random_tuple(spec, rng);
      const Index p = spec.num_factors() - 1;
      const ComplexMatrix lam = lambda_field(spec, ups, p);
      for (auto [i, j] : {std::pair<Index, Index>{0, 1}, {1, 3}, {2, 3}}) {
        // h(Psi) = f(U G(i, j, Psi)) for arbitrary 2x2 Psi.
        auto h = [&](const ComplexMatrix& psi) {
          UnitaryTuple v = ups;
          v[p] = v[p] * givens_matrix(spec.factor_dim(p), i, j, psi);
          return objective_value(spec, v);
        };
        const ComplexMatrix grad_h = skew(fd_wirtinger(h, ComplexMatrix::Identity(2, 2)));
        ComplexMatrix block(2, 2);
        block << lam(i, i), lam(i, j), lam(j, i), lam(j, j);
        EXPECT_LT((grad_h - block).norm(), 1e-10 * std::max(1.0, block.norm()))
            << to_string(fam) << " pair " << i << "," << j;
      }
    }
  }
}

TEST(Stationarity, DiagonalInstanceAtIdentity) {
  ProblemSpec spec;
  spec.family = Family::Jatd;
  spec.tensors = {diagonal_tensor({3, 4, 3}, {3.0, 2.0, 1.0})};
  spec.ranks = {2};
  const auto res = stationarity_pair_check(spec, identity_tuple(spec));
  EXPECT_LT(res.unitary, 1e-14);
  EXPECT_LT(res.stiefel, 1e-14);
}

TEST(Stationarity, RandomPointIsNotStationary) {
  std::mt19937_64 rng(33);
  ProblemSpec spec = random_problem(Family::Jatc, Dagger::ConjTranspose, rng, {4, 4, 4}, {2, 3, 2});
  const auto res = stationarity_pair_check(spec, random_tuple(spec, rng));
  EXPECT_GT(res.unitary, 1e-3);
  EXPECT_GT(res.stiefel, 1e-3);
}
