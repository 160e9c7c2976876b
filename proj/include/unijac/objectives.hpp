#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "unijac/manifold.hpp"
#include "unijac/tensor.hpp"

namespace unijac {

enum class Family { TraceMax, JatdSymmetric, Jatd, Jatc };

/// How a factor enters the transformed tensor: U^H (ConjTranspose) or U^T.
enum class Dagger { ConjTranspose, Transpose };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::TraceMax: return "tracemax";
    case Family::JatdSymmetric: return "jatd-s";
    case Family::Jatd: return "jatd";
    case Family::Jatc: return "jatc";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "tracemax") return Family::TraceMax;
  if (s == "jatd-s") return Family::JatdSymmetric;
  if (s == "jatd") return Family::Jatd;
  if (s == "jatc") return Family::Jatc;
  throw std::invalid_argument("unknown objective family '" + s + "'");
}

inline std::string to_string(Dagger d) {
  return d == Dagger::ConjTranspose ? "H" : "T";
}

inline Dagger dagger_from_string(const std::string& s) {
  if (s == "H" || s == "conj-transpose") return Dagger::ConjTranspose;
  if (s == "T" || s == "transpose") return Dagger::Transpose;
  throw std::invalid_argument("unknown dagger mode '" + s + "'");
}

/// Problem description shared by every solver.
///
/// Jatd / Jatc: one unitary factor per mode of the data tensors A^(l).
/// JatdSymmetric / TraceMax: a single factor acting on every mode.  For
/// TraceMax the tensors are Hermitian B of order 2*gamma, either one shared
/// tensor or one per optimized column.
struct ProblemSpec {
  Family family = Family::Jatd;
  std::vector<DenseTensor> tensors;
  std::vector<double> weights;  // empty means all ones
  std::vector<Index> ranks;     // per mode (Jatc), common (Jatd) or single
  Dagger dagger = Dagger::ConjTranspose;
  Index gamma = 1;
  bool real = false;

  bool single_factor() const {
    return family == Family::TraceMax || family == Family::JatdSymmetric;
  }

  Index num_factors() const {
    return single_factor() ? 1 : tensors.front().order();
  }

  Index factor_dim(Index p) const { return tensors.front().dim(p); }

  Index rank(Index p) const {
    if (ranks.empty()) return factor_dim(single_factor() ? 0 : p);
    return ranks.size() == 1 ? ranks[0] : ranks.at(p);
  }

  double weight(Index l) const { return weights.empty() ? 1.0 : weights.at(l); }

  double rho() const { return dagger == Dagger::ConjTranspose ? 1.0 : -1.0; }

  /// B^(q) used for column q of a TraceMax problem.
  const DenseTensor& trace_tensor(Index q) const {
    return tensors.size() == 1 ? tensors[0] : tensors.at(q);
  }

  Index max_dim() const {
    Index n = 0;
    for (Index p = 0; p < num_factors(); ++p) n = std::max(n, factor_dim(p));
    return n;
  }

  void validate() const {
    if (tensors.empty()) throw std::invalid_argument("ProblemSpec: no tensors");
    const auto& dims = tensors.front().dims();
    for (const auto& t : tensors) {
      if (t.dims() != dims) {
        throw std::invalid_argument("ProblemSpec: tensors have differing dimensions");
      }
    }
    if (!weights.empty()) {
      if (family == Family::TraceMax) {
        throw std::invalid_argument("ProblemSpec: weights are not used by tracemax");
      }
      if (weights.size() != tensors.size()) {
        throw std::invalid_argument("ProblemSpec: weights/tensors length mismatch");
      }
      for (double a : weights) {
        if (!(a > 0.0) || !std::isfinite(a)) {
          throw std::invalid_argument("ProblemSpec: weights must be positive");
        }
      }
    }
    if (single_factor()) {
      for (Index n : dims) {
        if (n != dims[0]) {
          throw std::invalid_argument(
              "ProblemSpec: " + to_string(family) + " needs equal mode dimensions");
        }
      }
    }
    if (family == Family::TraceMax) {
      if (gamma < 1 || dims.size() != 2 * gamma) {
        throw std::invalid_argument("ProblemSpec: tracemax tensors must have order 2*gamma");
      }
      for (const auto& b : tensors) {
        if (!is_hermitian_tensor(b, gamma, 1e-10 * (1.0 + std::sqrt(frobenius_norm_sq(b))))) {
          throw std::invalid_argument("ProblemSpec: tracemax tensor is not Hermitian");
        }
      }
    }
    if (single_factor()) {
      if (ranks.size() > 1) {
        throw std::invalid_argument("ProblemSpec: single-factor problems take one rank");
      }
    } else if (!ranks.empty() && ranks.size() != 1 && ranks.size() != dims.size()) {
      throw std::invalid_argument("ProblemSpec: ranks length must be 1 or the tensor order");
    }
    for (Index p = 0; p < num_factors(); ++p) {
      const Index r = rank(p);
      if (r < 1 || r > factor_dim(p)) {
        std::ostringstream msg;
        msg << "ProblemSpec: rank " << r << " out of range for mode " << p
            << " of dimension " << factor_dim(p);
        throw std::invalid_argument(msg.str());
      }
    }
    if (family == Family::Jatd) {
      Index nmin = dims[0];
      for (Index n : dims) nmin = std::min(nmin, n);
      for (Index p = 0; p < num_factors(); ++p) {
        if (rank(p) != rank(0)) {
          throw std::invalid_argument("ProblemSpec: jatd needs a common rank");
        }
      }
      if (rank(0) > nmin) {
        throw std::invalid_argument("ProblemSpec: jatd rank exceeds smallest dimension");
      }
    }
    if (family == Family::TraceMax && tensors.size() != 1 && tensors.size() != rank(0)) {
      throw std::invalid_argument(
          "ProblemSpec: tracemax takes one shared tensor or one per column");
    }
  }
};

struct ObjectiveState {
  std::vector<DenseTensor> W;
  double value = 0.0;
};

inline ComplexMatrix apply_dagger(const ComplexMatrix& u, Dagger d) {
  return d == Dagger::ConjTranspose ? ComplexMatrix(u.adjoint())
                                    : ComplexMatrix(u.transpose());
}

inline UnitaryTuple identity_tuple(const ProblemSpec& spec) {
  UnitaryTuple ups;
  for (Index p = 0; p < spec.num_factors(); ++p) {
    const auto n = static_cast<Eigen::Index>(spec.factor_dim(p));
    ups.push_back(ComplexMatrix::Identity(n, n));
  }
  return ups;
}

namespace detail {

inline const ComplexMatrix& factor(const UnitaryTuple& ups, Index p) {
  return ups.size() == 1 ? ups[0] : ups.at(p);
}

inline void check_factors(const ProblemSpec& spec, const UnitaryTuple& ups) {
  if (ups.size() != spec.num_factors()) {
    std::ostringstream msg;
    msg << "expected " << spec.num_factors() << " factors, got " << ups.size();
    throw std::invalid_argument(msg.str());
  }
  for (Index p = 0; p < ups.size(); ++p) {
    if (static_cast<Index>(ups[p].rows()) != spec.factor_dim(p)) {
      throw std::invalid_argument("factor row count does not match mode dimension");
    }
    if (static_cast<Index>(ups[p].cols()) < spec.rank(p)) {
      throw std::invalid_argument("factor has fewer columns than the target rank");
    }
  }
}

/// Visit every index tuple that contributes to the objective of a
/// Jatd/JatdSymmetric/Jatc problem, given the transformed tensor dims.
inline void for_each_scored(const ProblemSpec& spec, const std::vector<Index>& dims,
                            const std::function<void(const std::vector<Index>&)>& fn) {
  const Index d = dims.size();
  std::vector<Index> idx(d, 0);
  if (spec.family == Family::Jatd || spec.family == Family::JatdSymmetric) {
    Index r = spec.rank(0);
    for (Index n : dims) r = std::min(r, n);
    for (Index q = 0; q < r; ++q) {
      std::fill(idx.begin(), idx.end(), q);
      fn(idx);
    }
    return;
  }
  std::vector<Index> lim(d);
  for (Index p = 0; p < d; ++p) lim[p] = std::min(spec.rank(p), dims[p]);
  while (true) {
    fn(idx);
    Index p = 0;
    while (p < d && ++idx[p] == lim[p]) idx[p++] = 0;
    if (p == d) break;
  }
}

}  // namespace detail

/// W^(l) for the current factors.  Factors may be rectangular (Stiefel points).
inline std::vector<DenseTensor> transform(const ProblemSpec& spec,
                                          const UnitaryTuple& ups) {
  detail::check_factors(spec, ups);
  std::vector<DenseTensor> out;
  if (spec.family == Family::TraceMax) {
    if (spec.gamma != 1) {
      throw std::invalid_argument("transform: tracemax W only defined for gamma = 1");
    }
    const ComplexMatrix& u = ups[0];
    for (const auto& b : spec.tensors) {
      const ComplexMatrix bm = b.to_matrix();
      ComplexMatrix w = spec.dagger == Dagger::ConjTranspose
                            ? ComplexMatrix(u.adjoint() * bm * u)
                            : ComplexMatrix(u.transpose() * bm * u.conjugate());
      out.push_back(DenseTensor::from_matrix(w));
    }
    return out;
  }
  for (const auto& a : spec.tensors) {
    DenseTensor w = a;
    for (Index p = 0; p < a.order(); ++p) {
      w = mode_product(w, apply_dagger(detail::factor(ups, p), spec.dagger), p);
    }
    out.push_back(std::move(w));
  }
  return out;
}

/// Objective value read off the transformed tensors.
inline double value_from_transformed(const ProblemSpec& spec,
                                     const std::vector<DenseTensor>& W) {
  double f = 0.0;
  if (spec.family == Family::TraceMax) {
    const Index r = spec.rank(0);
    for (Index q = 0; q < r; ++q) {
      const DenseTensor& w = W.size() == 1 ? W[0] : W[q];
      f += w.at({q, q}).real();
    }
    return f;
  }
  for (Index l = 0; l < W.size(); ++l) {
    double s = 0.0;
    detail::for_each_scored(spec, W[l].dims(), [&](const std::vector<Index>& e) {
      s += std::norm(W[l].at(e));
    });
    f += spec.weight(l) * s;
  }
  return f;
}

inline ObjectiveState evaluate(const ProblemSpec& spec, const UnitaryTuple& ups) {
  ObjectiveState st;
  st.W = transform(spec, ups);
  st.value = value_from_transformed(spec, st.W);
  return st;
}

/// Full contraction of every B^(q) with gamma copies of conj(u_q) and gamma
/// copies of u_q (u_q replaced by conj(u_q) in Transpose mode).  Any gamma.
inline double eval_hposm(const ProblemSpec& spec, const ComplexMatrix& u) {
  if (spec.family != Family::TraceMax) {
    throw std::invalid_argument("eval_hposm: spec is not a tracemax problem");
  }
  spec.validate();
  const Index g = spec.gamma;
  const Index n = spec.factor_dim(0);
  if (static_cast<Index>(u.rows()) != n) {
    throw std::invalid_argument("eval_hposm: factor dimension mismatch");
  }
  const Index r = spec.rank(0);
  Complex total{0.0, 0.0};
  std::vector<Index> idx;
  for (Index q = 0; q < r; ++q) {
    const DenseTensor& b = spec.trace_tensor(q);
    std::vector<Complex> v(n);
    for (Index k = 0; k < n; ++k) {
      v[k] = spec.dagger == Dagger::ConjTranspose ? u(k, q) : std::conj(u(k, q));
    }
    for (Index k = 0; k < b.size(); ++k) {
      b.unravel(k, idx);
      Complex term = b[k];
      for (Index m = 0; m < g; ++m) term *= std::conj(v[idx[m]]) * v[idx[m + g]];
      total += term;
    }
  }
  return total.real();
}

inline ObjectiveState eval_jatd(const ProblemSpec& spec, const UnitaryTuple& ups) {
  if (spec.family != Family::Jatd && spec.family != Family::JatdSymmetric) {
    throw std::invalid_argument("eval_jatd: spec is not a diagonalization problem");
  }
  return evaluate(spec, ups);
}

inline ObjectiveState eval_jatc(const ProblemSpec& spec, const UnitaryTuple& ups) {
  if (spec.family != Family::Jatc) {
    throw std::invalid_argument("eval_jatc: spec is not a compression problem");
  }
  return evaluate(spec, ups);
}

/// Share of the squared norm sitting on the diagonal.
inline double per_ratio(const DenseTensor& t) {
  const double total = frobenius_norm_sq(t);
  if (total == 0.0) throw std::invalid_argument("per_ratio: zero tensor");
  double diag = 0.0;
  for (const Complex& z : diag_vector(t)) diag += std::norm(z);
  return diag / total;
}

inline double per_ratio(const std::vector<DenseTensor>& ts) {
  double total = 0.0;
  double diag = 0.0;
  for (const auto& t : ts) {
    total += frobenius_norm_sq(t);
    for (const Complex& z : diag_vector(t)) diag += std::norm(z);
  }
  if (total == 0.0) throw std::invalid_argument("per_ratio: zero tensor");
  return diag / total;
}

/// U^(p)^H times the Euclidean gradient of the mode-p restricted function,
/// computed from the transformed tensors.  n_p x n_p.
inline ComplexMatrix gradient_coordinates(const ProblemSpec& spec,
                                          const std::vector<DenseTensor>& W, Index p) {
  if (spec.family == Family::TraceMax) {
    if (spec.gamma != 1) {
      throw std::invalid_argument("gradient: tracemax supported for gamma = 1 only");
    }
    const Index n = W[0].dim(0);
    ComplexMatrix P = ComplexMatrix::Zero(n, n);
    const Index r = spec.rank(0);
    for (Index q = 0; q < r; ++q) {
      const DenseTensor& w = W.size() == 1 ? W[0] : W[q];
      for (Index a = 0; a < n; ++a) P(a, q) = 2.0 * w.at({a, q});
    }
    return spec.dagger == Dagger::ConjTranspose ? P : ComplexMatrix(P.conjugate());
  }
  std::vector<Index> modes;
  if (spec.family == Family::JatdSymmetric) {
    for (Index k = 0; k < W[0].order(); ++k) modes.push_back(k);
  } else {
    modes.push_back(p);
  }
  const Index n = W[0].dim(modes[0]);
  ComplexMatrix P = ComplexMatrix::Zero(n, n);
  std::vector<Index> shifted;
  for (Index l = 0; l < W.size(); ++l) {
    const double a2 = 2.0 * spec.weight(l);
    detail::for_each_scored(spec, W[l].dims(), [&](const std::vector<Index>& e) {
      const Complex we = std::conj(W[l].at(e));
      if (we == Complex{}) return;
      for (Index k : modes) {
        shifted = e;
        const Index q = e[k];
        for (Index a = 0; a < n; ++a) {
          shifted[k] = a;
          P(a, q) += a2 * W[l].at(shifted) * we;
        }
      }
    });
  }
  return spec.dagger == Dagger::ConjTranspose ? P : ComplexMatrix(P.conjugate());
}

/// Skew factor of the Riemannian gradient on mode p: grad = U^(p) * Lambda.
inline ComplexMatrix lambda_field(const ProblemSpec& spec, const std::vector<DenseTensor>& W,
                                  Index p) {
  return skew(gradient_coordinates(spec, W, p));
}

inline ComplexMatrix lambda_field(const ProblemSpec& spec, const UnitaryTuple& ups, Index p) {
  return lambda_field(spec, transform(spec, ups), p);
}

/// Euclidean (Wirtinger, 2 dg/dconj(X)) gradient with respect to factor p,
/// evaluated in the original coordinates.  Factors may be rectangular.
inline ComplexMatrix euclid_grad_mode(const ProblemSpec& spec, const UnitaryTuple& ups,
                                      Index p) {
  detail::check_factors(spec, ups);
  const ComplexMatrix& x = detail::factor(ups, p);
  ComplexMatrix grad = ComplexMatrix::Zero(x.rows(), x.cols());
  const bool herm = spec.dagger == Dagger::ConjTranspose;

  if (spec.family == Family::TraceMax) {
    if (spec.gamma != 1) {
      throw std::invalid_argument("euclid_grad_mode: tracemax supported for gamma = 1 only");
    }
    for (Index q = 0; q < spec.rank(0); ++q) {
      const ComplexMatrix b = spec.trace_tensor(q).to_matrix();
      grad.col(q) = 2.0 * (herm ? b : ComplexMatrix(b.conjugate())) * x.col(q);
    }
    return grad;
  }

  const Index d = spec.tensors.front().order();
  std::vector<Index> modes;
  if (spec.family == Family::JatdSymmetric) {
    for (Index k = 0; k < d; ++k) modes.push_back(k);
  } else {
    modes.push_back(p);
  }
  std::vector<Index> shifted;
  for (Index l = 0; l < spec.tensors.size(); ++l) {
    const double a2 = 2.0 * spec.weight(l);
    for (Index k : modes) {
      DenseTensor v = spec.tensors[l];
      for (Index m = 0; m < d; ++m) {
        if (m == k) continue;
        v = mode_product(v, apply_dagger(detail::factor(ups, m), spec.dagger), m);
      }
      const DenseTensor w = mode_product(v, apply_dagger(x, spec.dagger), k);
      const Index n = v.dim(k);
      detail::for_each_scored(spec, w.dims(), [&](const std::vector<Index>& e) {
        shifted = e;
        const Index q = e[k];
        for (Index t = 0; t < n; ++t) {
          shifted[k] = t;
          const Complex vt = v.at(shifted);
          grad(t, q) += herm ? a2 * vt * std::conj(w.at(e)) : a2 * w.at(e) * std::conj(vt);
        }
      });
    }
  }
  return grad;
}

inline double objective_value(const ProblemSpec& spec, const UnitaryTuple& ups) {
  if (spec.family == Family::TraceMax && spec.gamma != 1) return eval_hposm(spec, ups.at(0));
  return value_from_transformed(spec, transform(spec, ups));
}

/// sqrt(sum_p ||Lambda^(p)||^2): norm of the Riemannian gradient on the
/// product of unitary groups.
inline double grad_norm_from_lambdas(const std::vector<ComplexMatrix>& lambdas) {
  double s = 0.0;
  for (const auto& l : lambdas) s += l.squaredNorm();
  return std::sqrt(s);
}

inline std::vector<ComplexMatrix> all_lambdas(const ProblemSpec& spec,
                                              const std::vector<DenseTensor>& W) {
  std::vector<ComplexMatrix> out;
  for (Index p = 0; p < spec.num_factors(); ++p) out.push_back(lambda_field(spec, W, p));
  return out;
}

/// Riemannian gradient norms of the unitary lift at U and of the Stiefel
/// problem at the first r columns of each factor.
struct StationarityResiduals {
  double unitary = 0.0;
  double stiefel = 0.0;
};

inline StationarityResiduals stationarity_pair_check(const ProblemSpec& spec,
                                                     const UnitaryTuple& ups) {
  StationarityResiduals res;
  UnitaryTuple cut;
  for (Index p = 0; p < ups.size(); ++p) {
    cut.push_back(ups[p].leftCols(static_cast<Eigen::Index>(spec.rank(p))));
  }
  double su = 0.0;
  double sx = 0.0;
  for (Index p = 0; p < ups.size(); ++p) {
    const ComplexMatrix gu = euclid_grad_mode(spec, ups, p);
    su += riemannian_grad_unitary(gu, ups[p]).grad.squaredNorm();
    const ComplexMatrix gx = euclid_grad_mode(spec, cut, p);
    sx += riemannian_grad_stiefel(gx, cut[p]).squaredNorm();
  }
  res.unitary = std::sqrt(su);
  res.stiefel = std::sqrt(sx);
  return res;
}

/// B_{I,J} = A_I conj(A_J) summed over the weighted tensors (the ConjTranspose
/// reading of a symmetric diagonalization problem); conj(A_I) A_J for Transpose.
/// The result is a tracemax problem with gamma = order(A) and the same value.
inline ProblemSpec hermitian_lift(const ProblemSpec& spec) {
  if (spec.family != Family::JatdSymmetric) {
    throw std::invalid_argument("hermitian_lift: needs a symmetric diagonalization problem");
  }
  const DenseTensor& a0 = spec.tensors.front();
  const Index d = a0.order();
  const Index N = a0.size();
  std::vector<Index> dims(2 * d, a0.dim(0));
  DenseTensor b(dims);
  for (Index l = 0; l < spec.tensors.size(); ++l) {
    const DenseTensor& a = spec.tensors[l];
    const double w = spec.weight(l);
    for (Index J = 0; J < N; ++J) {
      for (Index I = 0; I < N; ++I) {
        const Complex v = spec.dagger == Dagger::ConjTranspose ? a[I] * std::conj(a[J])
                                                               : std::conj(a[I]) * a[J];
        b[I + N * J] += w * v;
      }
    }
  }
  ProblemSpec out;
  out.family = Family::TraceMax;
  out.tensors = {b};
  out.ranks = {spec.rank(0)};
  out.dagger = Dagger::ConjTranspose;
  out.gamma = d;
  out.real = spec.real;
  return out;
}

}  // namespace unijac
