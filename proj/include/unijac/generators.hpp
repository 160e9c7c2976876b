#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "unijac/manifold.hpp"
#include "unijac/objectives.hpp"
#include "unijac/tensor.hpp"

namespace unijac {

/// Small real 3x3x3 test tensor with a known best diagonal share.  The blocks
/// are frontal slices A(:,:,k), each written row by row.
inline DenseTensor reference_tensor() {
  const double slices[3][3][3] = {
      {{8, 8, 3}, {10, 5, 7}, {10, 5, 4}},
      {{10, 8, 10}, {8, 3, 7}, {5, 5, 3}},
      {{9, 3, 4}, {7, 7, 6}, {2, 7, 5}},
  };
  DenseTensor a({3, 3, 3});
  for (Index k = 0; k < 3; ++k)
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c) a.at({r, c, k}) = slices[k][r][c];
  return a;
}

inline ProblemSpec reference_problem() {
  ProblemSpec spec;
  spec.family = Family::Jatd;
  spec.tensors = {reference_tensor()};
  spec.ranks = {3};
  spec.real = true;
  return spec;
}

enum class GeneratorKind { NoisyDiagonal, RandomDense };

/// Diagonal profile for NoisyDiagonal: entry j (1-based) of tensor l (1-based).
enum class DiagonalProfile {
  SqrtPlusLinear,  // sqrt(j) + j*i   (real instances: sqrt(j) + j)
  TensorIndex,     // l
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::NoisyDiagonal;
  std::vector<Index> dims{3, 3, 3};
  std::vector<Index> ranks;  // empty: full
  Index L = 1;
  double noise = 1.0;  // multiplier of the unit-norm noise tensor
  DiagonalProfile diagonal = DiagonalProfile::SqrtPlusLinear;
  bool symmetric = false;  // one factor on all modes, symmetrized noise
  bool real = false;
  Family family = Family::Jatc;  // RandomDense only
  Dagger dagger = Dagger::ConjTranspose;
  std::uint64_t seed = 0;
};

struct Instance {
  ProblemSpec spec;
  UnitaryTuple truth;  // mixing factors (NoisyDiagonal)
};

template <class Rng>
DenseTensor gaussian_tensor(const std::vector<Index>& dims, Rng& rng, bool real) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor t(dims);
  for (Complex& z : t.data()) {
    const double re = normal(rng);
    const double im = real ? 0.0 : normal(rng);
    z = Complex(re, im);
  }
  return t;
}

/// Average over all permutations of the indices (equal dims required).
inline DenseTensor symmetrize(const DenseTensor& t) {
  const Index d = t.order();
  for (Index n : t.dims()) {
    if (n != t.dim(0)) throw std::invalid_argument("symmetrize: dims must be equal");
  }
  std::vector<Index> perm(d);
  for (Index k = 0; k < d; ++k) perm[k] = k;
  std::vector<std::vector<Index>> perms;
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  DenseTensor out(t.dims());
  std::vector<Index> idx, src(d);
  for (Index k = 0; k < t.size(); ++k) {
    t.unravel(k, idx);
    Complex s{};
    for (const auto& p : perms) {
      for (Index m = 0; m < d; ++m) src[m] = idx[p[m]];
      s += t.at(src);
    }
    out[k] = s / static_cast<double>(perms.size());
  }
  return out;
}

inline Instance generate(const GeneratorSpec& g) {
  if (g.dims.empty()) throw std::invalid_argument("generate: no dimensions");
  if (g.L < 1) throw std::invalid_argument("generate: L must be positive");
  if (g.noise < 0.0) throw std::invalid_argument("generate: noise must be nonnegative");
  std::mt19937_64 rng(g.seed);
  Instance inst;
  ProblemSpec& spec = inst.spec;
  spec.real = g.real;
  spec.dagger = g.dagger;
  spec.ranks = g.ranks;

  if (g.kind == GeneratorKind::RandomDense) {
    spec.family = g.family;
    for (Index l = 0; l < g.L; ++l) {
      DenseTensor a = gaussian_tensor(g.dims, rng, g.real);
      spec.tensors.push_back(g.symmetric ? symmetrize(a) : a);
    }
    spec.validate();
    return inst;
  }

  spec.family = g.symmetric ? Family::JatdSymmetric : Family::Jatd;
  const Index d = g.dims.size();
  const Index nfac = g.symmetric ? 1 : d;
  for (Index p = 0; p < nfac; ++p) inst.truth.push_back(haar_unitary(g.dims[p], rng, g.real));
  Index nd = g.dims[0];
  for (Index n : g.dims) nd = std::min(nd, n);
  if (spec.ranks.empty()) spec.ranks = {nd};

  for (Index l = 0; l < g.L; ++l) {
    DenseTensor dtn(g.dims);
    std::vector<Index> idx(d);
    for (Index j = 0; j < nd; ++j) {
      std::fill(idx.begin(), idx.end(), j);
      const double jj = static_cast<double>(j + 1);
      Complex v;
      if (g.diagonal == DiagonalProfile::SqrtPlusLinear) {
        v = g.real ? Complex(std::sqrt(jj) + jj, 0.0) : Complex(std::sqrt(jj), jj);
      } else {
        v = Complex(static_cast<double>(l + 1), 0.0);
      }
      dtn.at(idx) = v;
    }
    DenseTensor a = dtn;
    for (Index p = 0; p < d; ++p) a = mode_product(a, inst.truth[g.symmetric ? 0 : p], p);
    if (g.noise > 0.0) {
      DenseTensor e = gaussian_tensor(g.dims, rng, g.real);
      if (g.symmetric) e = symmetrize(e);
      const double en = std::sqrt(frobenius_norm_sq(e));
      for (Index k = 0; k < a.size(); ++k) a[k] += g.noise * e[k] / en;
    }
    spec.tensors.push_back(std::move(a));
  }
  spec.validate();
  return inst;
}

}  // namespace unijac
