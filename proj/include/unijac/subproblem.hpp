#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "unijac/objectives.hpp"
#include "unijac/tensor.hpp"

namespace unijac {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

struct GivensParams {
  Index p = 0;
  Index i = 0;
  Index j = 1;
  double theta = 0.0;
  double phi = 0.0;
};

/// h(theta, phi) = z^T M z + C with z = z_{alpha,beta}(theta, phi).
struct QuadSubproblem {
  Mat3 M = Mat3::Zero();
  double C = 0.0;
  int alpha = 1;
  int beta = 1;
};

struct QuadFormTerm {
  int alpha = 1;
  int beta = 1;
  Mat3 M = Mat3::Zero();
};

/// Sum of quadratic forms in different z_{alpha,beta} plus a constant.
struct QuadFormSum {
  std::vector<QuadFormTerm> terms;
  double C = 0.0;

  double eval(double theta, double phi) const;
  /// eval(theta, phi) - at_identity() without cancellation.
  double gain(double theta, double phi) const;
  /// Value at the identity rotation.
  double at_identity() const {
    double s = C;
    for (const auto& t : terms) s += t.M(0, 0);
    return s;
  }
};

struct RotationPlan {
  GivensParams params;
  Eigen::Matrix2cd Psi = Eigen::Matrix2cd::Identity();
  Vec3 w = Vec3::UnitX();
  double predicted_gain = 0.0;
};

/// (cos a*theta, -sin a*theta cos b*phi, -sin a*theta sin b*phi)
inline Vec3 z_vector(int alpha, int beta, double theta, double phi) {
  const double s = std::sin(alpha * theta);
  return Vec3(std::cos(alpha * theta), -s * std::cos(beta * phi), -s * std::sin(beta * phi));
}

/// z^T M z - M_11 written as (z - e1)^T M (z + e1).
inline double form_gain(const Mat3& m, const Vec3& z) {
  const double h = z(1) * z(1) + z(2) * z(2);
  const Vec3 d(-h / (1.0 + z(0)), z(1), z(2));
  return d.dot(m * (z + Vec3::UnitX()));
}

inline double QuadFormSum::gain(double theta, double phi) const {
  double s = 0.0;
  for (const auto& t : terms) {
    const double sh = std::sin(0.5 * t.alpha * theta);
    const double sa = std::sin(t.alpha * theta);
    const Vec3 d(-2.0 * sh * sh, -sa * std::cos(t.beta * phi), -sa * std::sin(t.beta * phi));
    s += d.dot(t.M * (d + 2.0 * Vec3::UnitX()));
  }
  return s;
}

inline double QuadFormSum::eval(double theta, double phi) const {
  double s = C;
  for (const auto& t : terms) {
    const Vec3 z = z_vector(t.alpha, t.beta, theta, phi);
    s += z.dot(t.M * z);
  }
  return s;
}

inline double eval_quad(const QuadSubproblem& q, double theta, double phi) {
  const Vec3 z = z_vector(q.alpha, q.beta, theta, phi);
  return z.dot(q.M * z) + q.C;
}

/// [[c, -s e^{i phi}], [s e^{-i phi}, c]]
inline Eigen::Matrix2cd givens_block(double theta, double phi) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Complex e = std::polar(1.0, phi);
  Eigen::Matrix2cd psi;
  psi << c, -s * e, s * std::conj(e), c;
  return psi;
}

/// Identity with the 2x2 block planted at rows/columns (i, j).
inline ComplexMatrix givens_matrix(Index n, Index i, Index j, const Eigen::Matrix2cd& psi) {
  ComplexMatrix g = ComplexMatrix::Identity(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  g(ii, ii) = psi(0, 0);
  g(ii, jj) = psi(0, 1);
  g(jj, ii) = psi(1, 0);
  g(jj, jj) = psi(1, 1);
  return g;
}

/// ||Psi - I||_F
inline double step_norm(double theta) { return 2.0 * std::sqrt(std::max(0.0, 1.0 - std::cos(theta))); }

/// Update the transformed tensors after U^(p) <- U^(p) G(i, j, Psi).
inline void rotate_transformed(const ProblemSpec& spec, std::vector<DenseTensor>& W, Index p,
                               Index i, Index j, const Eigen::Matrix2cd& psi) {
  const Eigen::Matrix2cd m = spec.dagger == Dagger::ConjTranspose
                                 ? Eigen::Matrix2cd(psi.adjoint())
                                 : Eigen::Matrix2cd(psi.transpose());
  for (auto& w : W) {
    if (spec.family == Family::TraceMax) {
      mix_slices(w, 0, i, j, m);
      mix_slices(w, 1, i, j, m.conjugate());
    } else if (spec.family == Family::JatdSymmetric) {
      for (Index k = 0; k < w.order(); ++k) mix_slices(w, k, i, j, m);
    } else {
      mix_slices(w, p, i, j, m);
    }
  }
}

/// Objective after U^(p) <- U^(p) G(i, j, Psi(theta, phi)), evaluated from scratch.
inline double elementary_eval(const ProblemSpec& spec, const UnitaryTuple& ups, Index p,
                              Index i, Index j, double theta, double phi) {
  if (p >= ups.size() || i >= j || j >= static_cast<Index>(ups[p].cols())) {
    throw std::invalid_argument("elementary_eval: invalid mode or index pair");
  }
  UnitaryTuple moved = ups;
  moved[p] = moved[p] * givens_matrix(static_cast<Index>(moved[p].cols()), i, j,
                                      givens_block(theta, phi));
  return objective_value(spec, moved);
}

// ---------------------------------------------------------------------------
// Builders for the families whose elementary function is a single form.

enum class PairClass { BothInside, Straddling, BothOutside };

inline PairClass classify_pair(Index r, Index i, Index j) {
  if (j < r) return PairClass::BothInside;
  if (i < r) return PairClass::Straddling;
  return PairClass::BothOutside;
}

inline Mat3 arrow_matrix(double m11, double m12, double m13) {
  Mat3 m = Mat3::Zero();
  m(0, 0) = m11;
  m(0, 1) = m(1, 0) = m12;
  m(0, 2) = m(2, 0) = m13;
  return m;
}

namespace detail {

inline void check_pair(const ProblemSpec& spec, Index p, Index i, Index j) {
  if (p >= spec.num_factors() || i >= j || j >= spec.factor_dim(p)) {
    std::ostringstream msg;
    msg << "invalid rotation (mode " << p << ", pair " << i << "," << j << ")";
    throw std::invalid_argument(msg.str());
  }
}

inline QuadSubproblem finish(const Mat3& m, double h0) {
  QuadSubproblem q;
  q.M = m;
  q.C = h0 - m(0, 0);
  return q;
}

}  // namespace detail

inline QuadSubproblem build_subproblem_jatd(const ProblemSpec& spec,
                                            const std::vector<DenseTensor>& W, Index p,
                                            Index i, Index j) {
  if (spec.family != Family::Jatd) {
    throw std::invalid_argument("build_subproblem_jatd: needs a jatd problem");
  }
  detail::check_pair(spec, p, i, j);
  const double rho = spec.rho();
  const PairClass cls = classify_pair(spec.rank(0), i, j);
  double m11 = 0.0, m12 = 0.0, m13 = 0.0;
  if (cls != PairClass::BothOutside) {
    const Index d = W[0].order();
    std::vector<Index> idx(d);
    for (Index l = 0; l < W.size(); ++l) {
      const double al = spec.weight(l);
      std::fill(idx.begin(), idx.end(), i);
      const Complex a = W[l].at(idx);
      idx[p] = j;
      const Complex b = W[l].at(idx);
      const Complex ab = std::conj(a) * b;
      m11 += al * (std::norm(a) - std::norm(b));
      m12 -= al * ab.real();
      m13 += al * rho * ab.imag();
      if (cls == PairClass::BothInside) {
        std::fill(idx.begin(), idx.end(), j);
        const Complex e = W[l].at(idx);
        idx[p] = i;
        const Complex f = W[l].at(idx);
        const Complex ef = std::conj(e) * f;
        m11 += al * (std::norm(e) - std::norm(f));
        m12 += al * ef.real();
        m13 += al * rho * ef.imag();
      }
    }
  }
  return detail::finish(arrow_matrix(m11, m12, m13), value_from_transformed(spec, W));
}

inline QuadSubproblem build_subproblem_jatc(const ProblemSpec& spec,
                                            const std::vector<DenseTensor>& W, Index p,
                                            Index i, Index j) {
  if (spec.family != Family::Jatc) {
    throw std::invalid_argument("build_subproblem_jatc: needs a jatc problem");
  }
  detail::check_pair(spec, p, i, j);
  const double rho = spec.rho();
  double m11 = 0.0, m12 = 0.0, m13 = 0.0;
  if (classify_pair(spec.rank(p), i, j) == PairClass::Straddling) {
    const Index d = W[0].order();
    std::vector<Index> lim(d);
    for (Index k = 0; k < d; ++k) lim[k] = spec.rank(k);
    lim[p] = 1;
    std::vector<Index> idx(d, 0);
    for (Index l = 0; l < W.size(); ++l) {
      const double al = spec.weight(l);
      std::fill(idx.begin(), idx.end(), 0);
      while (true) {
        idx[p] = i;
        const Complex a = W[l].at(idx);
        idx[p] = j;
        const Complex b = W[l].at(idx);
        const Complex ab = std::conj(a) * b;
        m11 += al * (std::norm(a) - std::norm(b));
        m12 -= al * ab.real();
        m13 += al * rho * ab.imag();
        idx[p] = 0;
        Index k = 0;
        while (k < d && ++idx[k] >= lim[k]) idx[k++] = 0;
        if (k == d) break;
      }
    }
  }
  return detail::finish(arrow_matrix(m11, m12, m13), value_from_transformed(spec, W));
}

inline QuadSubproblem build_subproblem_tracemax(const ProblemSpec& spec,
                                                const std::vector<DenseTensor>& W, Index i,
                                                Index j) {
  if (spec.family != Family::TraceMax || spec.gamma != 1) {
    throw std::invalid_argument("build_subproblem_tracemax: needs a gamma = 1 tracemax problem");
  }
  detail::check_pair(spec, 0, i, j);
  const double rho = spec.rho();
  auto block_form = [&](const DenseTensor& w) {
    const Complex wij = w.at({i, j});
    return arrow_matrix(w.at({i, i}).real() - w.at({j, j}).real(), -wij.real(),
                        -rho * wij.imag());
  };
  Mat3 m = Mat3::Zero();
  const Index r = spec.rank(0);
  const PairClass cls = classify_pair(r, i, j);
  if (cls == PairClass::Straddling) {
    m = block_form(W.size() == 1 ? W[0] : W[i]);
  } else if (cls == PairClass::BothInside && W.size() > 1) {
    m = block_form(W[i]) - block_form(W[j]);
  }
  return detail::finish(m, value_from_transformed(spec, W));
}

// ---------------------------------------------------------------------------
// Multi-form decompositions of 2x..x2 Hermitian semisymmetric tensors.

/// x-form: sum_{I,J} C_{I,J} conj(x_I) x_J with x = Psi e_1 equals
///   sum_terms z^T M z + cx;
/// y-form (x replaced by Psi e_2) equals sum_terms (-1)^alpha z^T M z + cy.
struct GammaDecomposition {
  std::vector<QuadFormTerm> terms;
  double cx = 0.0;
  double cy = 0.0;

  QuadFormSum x_form() const { return {terms, cx}; }
  QuadFormSum y_form() const {
    QuadFormSum s{terms, cy};
    for (auto& t : s.terms) {
      if (t.alpha % 2 != 0) t.M = -t.M;
    }
    return s;
  }
};

namespace detail {

/// Entry of an order-2*gamma 2x..x2 tensor addressed by the counts of
/// second-basis indices in each block, with the 2s placed last.
inline Complex block_entry(const DenseTensor& c, Index gamma, Index t1, Index t2) {
  std::vector<Index> idx(2 * gamma, 0);
  for (Index k = gamma - t1; k < gamma; ++k) idx[k] = 1;
  for (Index k = 2 * gamma - t2; k < 2 * gamma; ++k) idx[k] = 1;
  return c.at(idx);
}

inline Mat3 full_form(double m11, double m12, double m13, double l22, double l23) {
  Mat3 m;
  m << m11, m12, m13, m12, l22, l23, m13, l23, -l22;
  return m;
}

}  // namespace detail

inline GammaDecomposition build_quadforms_gamma(const DenseTensor& c, Index gamma) {
  if (gamma < 1 || gamma > 3) {
    throw std::invalid_argument("build_quadforms_gamma: only gamma in {1,2,3} is supported");
  }
  if (c.order() != 2 * gamma) {
    throw std::invalid_argument("build_quadforms_gamma: tensor order must be 2*gamma");
  }
  for (Index n : c.dims()) {
    if (n != 2) throw std::invalid_argument("build_quadforms_gamma: dimensions must be 2");
  }
  auto K = [&](Index t1, Index t2) { return detail::block_entry(c, gamma, t1, t2); };
  GammaDecomposition out;
  if (gamma == 1) {
    const Complex c12 = K(0, 1);
    out.terms.push_back({1, 1, arrow_matrix(K(0, 0).real() - K(1, 1).real(), -c12.real(),
                                            -c12.imag())});
    out.cx = K(1, 1).real();
    out.cy = K(0, 0).real();
    return out;
  }
  if (gamma == 2) {
    // K(0,0)=C1111  K(2,2)=C2222  K(1,1)=C1212  K(0,1)=C1112  K(1,2)=C1222  K(0,2)=C1122
    const double c1111 = K(0, 0).real();
    const double c2222 = K(2, 2).real();
    const double c1212 = K(1, 1).real();
    const Complex c1112 = K(0, 1);
    const Complex c1222 = K(1, 2);
    const Complex c1122 = K(0, 2);
    Mat3 m21;
    m21 << c1111 + c2222, 2.0 * (c1222 - c1112).real(), 2.0 * (c1222 - c1112).imag(),
        2.0 * (c1222 - c1112).real(), 2.0 * c1122.real() + 4.0 * c1212, 2.0 * c1122.imag(),
        2.0 * (c1222 - c1112).imag(), 2.0 * c1122.imag(), -2.0 * c1122.real() + 4.0 * c1212;
    out.terms.push_back({2, 1, 0.25 * m21});
    out.terms.push_back({1, 1, arrow_matrix(c1111 - c2222, -(c1222 + c1112).real(),
                                            -(c1222 + c1112).imag())});
    out.cx = 0.25 * (3.0 * c2222 - c1111);
    out.cy = 0.25 * (3.0 * c1111 - c2222);
    return out;
  }
  const double k00 = K(0, 0).real(), k11 = K(1, 1).real();
  const double k22 = K(2, 2).real(), k33 = K(3, 3).real();
  const Complex k01 = K(0, 1), k12 = K(1, 2), k23 = K(2, 3);
  const Complex k02 = K(0, 2), k13 = K(1, 3), k03 = K(0, 3);
  const double e = 1.0 / 8.0;

  out.terms.push_back({3, 3, e * arrow_matrix(0.0, 0.5 * k03.real(), 0.5 * k03.imag())});
  out.terms.push_back(
      {3, 1,
       e * detail::full_form(0.5 * (k00 - k33) - 4.5 * (k11 - k22),
                             -1.5 * (k01.real() + k23.real() - 3.0 * k12.real()),
                             -1.5 * (k01.imag() + k23.imag() - 3.0 * k12.imag()),
                             3.0 * (k02.real() - k13.real()), 3.0 * (k02.imag() - k13.imag()))});
  out.terms.push_back(
      {2, 1,
       3.0 * e *
           detail::full_form(k00 + k33 - 3.0 * (k11 + k22), -2.0 * (k01.real() - k23.real()),
                             -2.0 * (k01.imag() - k23.imag()), 2.0 * (k02.real() + k13.real()),
                             2.0 * (k02.imag() + k13.imag()))});
  out.terms.push_back(
      {1, 1,
       e * detail::full_form(7.5 * (k00 - k33) + 4.5 * (k11 - k22),
                             -1.5 * (5.0 * k01.real() + 9.0 * k12.real() + 5.0 * k23.real()),
                             -1.5 * (5.0 * k01.imag() + 9.0 * k12.imag() + 5.0 * k23.imag()),
                             -3.0 * (k02.real() - k13.real()), -3.0 * (k02.imag() - k13.imag()))});
  out.terms.push_back({1, 3, e * arrow_matrix(0.0, -1.5 * k03.real(), -1.5 * k03.imag())});
  out.cx = e * (-3.0 * k00 + 5.0 * k33 + 9.0 * (k11 + k22));
  out.cy = e * (5.0 * k00 - 3.0 * k33 + 9.0 * (k11 + k22));
  return out;
}

/// Average over index permutations inside each of the two blocks.
inline DenseTensor semisymmetrize(const DenseTensor& c, Index gamma) {
  std::vector<Index> perm(gamma);
  for (Index k = 0; k < gamma; ++k) perm[k] = k;
  std::vector<std::vector<Index>> perms;
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  DenseTensor out(c.dims());
  std::vector<Index> idx, src(2 * gamma);
  const double scale = 1.0 / static_cast<double>(perms.size() * perms.size());
  for (Index k = 0; k < c.size(); ++k) {
    c.unravel(k, idx);
    Complex s{0.0, 0.0};
    for (const auto& p1 : perms) {
      for (const auto& p2 : perms) {
        for (Index m = 0; m < gamma; ++m) {
          src[m] = idx[p1[m]];
          src[gamma + m] = idx[gamma + p2[m]];
        }
        s += c.at(src);
      }
    }
    out[k] = s * scale;
  }
  return out;
}

/// Elementary function of a symmetric diagonalization problem (one factor on
/// every mode, order d in {1,2,3}) as a sum of quadratic forms.
inline QuadFormSum build_subproblem_jatd_symmetric(const ProblemSpec& spec,
                                                   const std::vector<DenseTensor>& W, Index i,
                                                   Index j) {
  if (spec.family != Family::JatdSymmetric) {
    throw std::invalid_argument("build_subproblem_jatd_symmetric: needs a jatd-s problem");
  }
  detail::check_pair(spec, 0, i, j);
  const Index d = W[0].order();
  if (d > 3) {
    throw std::invalid_argument("build_subproblem_jatd_symmetric: tensor order above 3");
  }
  const double h0 = value_from_transformed(spec, W);
  QuadFormSum out;
  const PairClass cls = classify_pair(spec.rank(0), i, j);
  if (cls == PairClass::BothOutside) {
    out.C = h0;
    return out;
  }
  // Restrict every W^(l) to the {i, j} index set and form the lifted tensor.
  const Index nsub = Index{1} << d;
  std::vector<Index> dims(2 * d, 2);
  DenseTensor c(dims);
  std::vector<Index> idx(d);
  for (Index l = 0; l < W.size(); ++l) {
    std::vector<Complex> sub(nsub);
    for (Index k = 0; k < nsub; ++k) {
      for (Index m = 0; m < d; ++m) idx[m] = ((k >> m) & 1U) ? j : i;
      sub[k] = W[l].at(idx);
    }
    for (Index b = 0; b < nsub; ++b) {
      for (Index a = 0; a < nsub; ++a) {
        const Complex v = spec.dagger == Dagger::ConjTranspose ? sub[a] * std::conj(sub[b])
                                                               : std::conj(sub[a]) * sub[b];
        c[a + nsub * b] += spec.weight(l) * v;
      }
    }
  }
  const GammaDecomposition dec = build_quadforms_gamma(semisymmetrize(c, d), d);
  const QuadFormSum xs = dec.x_form();
  out.terms = xs.terms;
  if (cls == PairClass::BothInside) {
    const QuadFormSum ys = dec.y_form();
    for (Index t = 0; t < out.terms.size(); ++t) out.terms[t].M += ys.terms[t].M;
  }
  double id = 0.0;
  for (const auto& t : out.terms) id += t.M(0, 0);
  out.C = h0 - id;
  return out;
}

/// Dispatch for the single-form families.
inline QuadSubproblem build_subproblem(const ProblemSpec& spec, const std::vector<DenseTensor>& W,
                                       Index p, Index i, Index j) {
  switch (spec.family) {
    case Family::Jatd: return build_subproblem_jatd(spec, W, p, i, j);
    case Family::Jatc: return build_subproblem_jatc(spec, W, p, i, j);
    case Family::TraceMax: return build_subproblem_tracemax(spec, W, i, j);
    case Family::JatdSymmetric: break;
  }
  throw std::invalid_argument(
      "build_subproblem: jatd-s elementary functions are sums of forms; use "
      "build_subproblem_jatd_symmetric");
}

// ---------------------------------------------------------------------------
// Solving.

struct SymEigen3 {
  Vec3 values;  // descending
  Mat3 vectors; // columns match values
};

/// Cyclic Jacobi eigenvalue iteration for a real symmetric 3x3 matrix.
inline SymEigen3 sym_eigen3(const Mat3& m_in) {
  Mat3 a = 0.5 * (m_in + m_in.transpose());
  Mat3 v = Mat3::Identity();
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::sqrt(a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2));
    if (off <= 1e-14 * scale * 1e-2) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) <= 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });
  SymEigen3 out;
  for (int k = 0; k < 3; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

inline bool is_arrow(const Mat3& m) {
  return m(1, 1) == 0.0 && m(1, 2) == 0.0 && m(2, 1) == 0.0 && m(2, 2) == 0.0;
}

/// Make w1 >= 0; if w1 == 0 the first nonzero component is made positive.
inline Vec3 fix_sign(Vec3 w) {
  for (int k = 0; k < 3; ++k) {
    if (w(k) != 0.0) {
      if (w(k) < 0.0) w = -w;
      break;
    }
  }
  return w;
}

/// Unit eigenvector for the largest eigenvalue, preferring the largest first
/// component inside a multiple top eigenspace.
inline Vec3 top_eigenvector(const Mat3& m) {
  if (is_arrow(m)) {
    const double m11 = m(0, 0);
    const double rho2 = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2);
    if (rho2 == 0.0) {
      // Top eigenvalue is max(m11, 0).
      return m11 >= 0.0 ? Vec3::UnitX() : Vec3::UnitY();
    }
    const double s = std::sqrt(m11 * m11 + 4.0 * rho2);
    const double lam = m11 >= 0.0 ? 0.5 * (m11 + s) : 2.0 * rho2 / (s - m11);
    return fix_sign(Vec3(lam, m(0, 1), m(0, 2)).normalized());
  }
  const SymEigen3 eg = sym_eigen3(m);
  const double tol = 1e-12 * std::max(1.0, eg.values.cwiseAbs().maxCoeff());
  int mult = 1;
  while (mult < 3 && eg.values(0) - eg.values(mult) <= tol) ++mult;
  Vec3 w = eg.vectors.col(0);
  if (mult > 1) {
    Vec3 proj = Vec3::Zero();
    for (int k = 0; k < mult; ++k) proj += eg.vectors(0, k) * eg.vectors.col(k);
    if (proj.norm() > 1e-12) w = proj.normalized();
  }
  return fix_sign(w.normalized());
}

/// Rotation angles from a unit vector w = z_{alpha,beta}(theta, phi).
inline GivensParams w_to_givens(const Vec3& w, int alpha = 1, int beta = 1) {
  if (std::abs(w.norm() - 1.0) > 1e-10) {
    throw std::invalid_argument("w_to_givens: vector is not of unit length");
  }
  if (w(0) < -1e-14) throw std::invalid_argument("w_to_givens: first component is negative");
  GivensParams g;
  const double sn = std::hypot(w(1), w(2));
  g.theta = std::atan2(sn, std::max(w(0), 0.0)) / alpha;
  // Adding +0.0 turns a negative zero into a positive one so that phi = pi
  // rather than -pi on the negative real axis.
  g.phi = sn == 0.0 ? 0.0 : std::atan2(-w(2) + 0.0, -w(1)) / beta;
  return g;
}

inline RotationPlan plan_from_w(const Mat3& m, const Vec3& w, int alpha, int beta) {
  RotationPlan plan;
  plan.w = w;
  plan.params = w_to_givens(w, alpha, beta);
  plan.Psi = givens_block(plan.params.theta, plan.params.phi);
  plan.predicted_gain = form_gain(m, w);
  return plan;
}

inline RotationPlan solve_quadratic(const QuadSubproblem& q) {
  if (q.M.isZero(0.0)) return RotationPlan{};
  return plan_from_w(q.M, top_eigenvector(q.M), q.alpha, q.beta);
}

/// Maximize z^T M z + 2 eps z_1 over the unit sphere.
inline Vec3 solve_sphere_ls(const Mat3& m, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("solve_proximal: epsilon must be positive");
  const SymEigen3 eg = sym_eigen3(m);
  const Vec3 lam = eg.values;
  const Vec3 b = eps * eg.vectors.row(0).transpose();  // Q^T (eps e1)
  const double mscale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  const double gap_tol = 1e-12 * mscale;
  int mult = 1;
  while (mult < 3 && lam(0) - lam(mult) <= gap_tol) ++mult;
  double btop2 = 0.0;
  for (int k = 0; k < mult; ++k) btop2 += b(k) * b(k);

  // Shifts l - lam_k written as t + gap_k so that small t keeps full precision.
  const Vec3 gap(0.0, lam(0) - lam(1), lam(0) - lam(2));
  auto y_of = [&](double t) {
    Vec3 y;
    for (int k = 0; k < 3; ++k) y(k) = b(k) / (t + gap(k));
    return y;
  };
  Vec3 y;
  double lam_star = 0.0;
  bool done = false;
  if (btop2 <= (1e-14 * eps) * (1e-14 * eps)) {
    // Hard case: e1 (nearly) orthogonal to the top eigenspace.
    double tail = 0.0;
    Vec3 yr = Vec3::Zero();
    for (int k = mult; k < 3; ++k) {
      yr(k) = b(k) / gap(k);
      tail += yr(k) * yr(k);
    }
    if (tail <= 1.0) {
      yr(0) = std::sqrt(std::max(0.0, 1.0 - tail));
      y = yr;
      lam_star = lam(0);
      done = true;
    }
  }
  if (!done) {
    // Secular equation 1/||y(t)|| - 1 = 0 on (0, eps].
    double lo = 0.0;
    double hi = eps;
    double t = hi;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      y = y_of(t);
      const double ny = y.norm();
      const double f = 1.0 / ny - 1.0;
      if (std::abs(ny - 1.0) <= 1e-13) {
        converged = true;
        break;
      }
      if (f > 0.0) hi = t; else lo = t;  // ||y|| < 1 means t too large
      // d/dt (1/||y||) = (sum y_k^2/(t + gap_k)) / ||y||^3
      double dsum = 0.0;
      for (int k = 0; k < 3; ++k) dsum += y(k) * y(k) / (t + gap(k));
      const double df = dsum / (ny * ny * ny);
      double next = t - f / df;
      if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
      // Bracket down to a few ulps; the KKT check below judges the result.
      if (hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() * t) {
        converged = std::abs(ny - 1.0) <= 1e-6;
        break;
      }
      t = next;
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "solve_proximal: secular iteration did not converge (||y|| = " << y.norm() << ")";
      throw std::runtime_error(msg.str());
    }
    lam_star = lam(0) + t;
  }
  Vec3 z = (eg.vectors * y).normalized();
  const double kkt = (m * z + eps * Vec3::UnitX() - lam_star * z).norm();
  if (kkt > 1e-9 * (mscale + eps)) {
    std::ostringstream msg;
    msg << "solve_proximal: KKT residual " << kkt << " too large";
    throw std::runtime_error(msg.str());
  }
  if (z(0) < 0.0) z(0) = 0.0;  // roundoff only; the maximizer has z1 >= 0
  return z.normalized();
}

inline RotationPlan solve_proximal(const QuadSubproblem& q, double eps) {
  const Vec3 z = solve_sphere_ls(q.M, eps);
  return plan_from_w(q.M, z, q.alpha, q.beta);
}

/// Maximize h(theta, phi) - eps*||z_{1,1} - e1||^2 for a sum of forms: grid
/// search followed by Newton refinement in (theta cos phi, theta sin phi).
/// The identity is returned unless a strict improvement is found.
inline RotationPlan maximize_form_sum(const QuadFormSum& s, double eps = 0.0) {
  auto obj = [&](double a, double b) {
    const double th = std::hypot(a, b);
    const double ph = th == 0.0 ? 0.0 : std::atan2(b, a);
    const double sh = std::sin(0.5 * th);
    return s.gain(th, ph) - 4.0 * eps * sh * sh;
  };
  double scale = 1.0 + eps;
  for (const auto& t : s.terms) scale += t.M.cwiseAbs().maxCoeff();
  double best = 0.0;
  double ba = 0.0, bb = 0.0;
  constexpr int kTheta = 24;
  constexpr int kPhi = 48;
  const double pi = std::numbers::pi;
  for (int t = 1; t <= kTheta; ++t) {
    const double th = 0.5 * pi * t / kTheta;
    for (int k = 0; k < kPhi; ++k) {
      const double ph = -pi + 2.0 * pi * (k + 1) / kPhi;
      const double v = obj(th * std::cos(ph), th * std::sin(ph));
      if (v > best) {
        best = v;
        ba = th * std::cos(ph);
        bb = th * std::sin(ph);
      }
    }
  }
  // Newton with central-difference derivatives and backtracking.
  const double h = 1e-4;
  for (int it = 0; it < 40; ++it) {
    const double fpp = obj(ba + h, bb), fmm = obj(ba - h, bb);
    const double fpq = obj(ba, bb + h), fmq = obj(ba, bb - h);
    const double ga = (fpp - fmm) / (2 * h), gb = (fpq - fmq) / (2 * h);
    const double haa = (fpp - 2 * best + fmm) / (h * h);
    const double hbb = (fpq - 2 * best + fmq) / (h * h);
    const double hab = (obj(ba + h, bb + h) - obj(ba + h, bb - h) - obj(ba - h, bb + h) +
                        obj(ba - h, bb - h)) / (4 * h * h);
    if (std::hypot(ga, gb) <= 1e-12 * scale) break;
    double da, db;
    const double det = haa * hbb - hab * hab;
    if (haa < 0 && det > 0) {
      da = -(hbb * ga - hab * gb) / det;
      db = -(-hab * ga + haa * gb) / det;
    } else {
      da = ga;
      db = gb;
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const double v = obj(ba + step * da, bb + step * db);
      if (v > best) {
        best = v;
        ba += step * da;
        bb += step * db;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  RotationPlan plan;
  if (best > 0.0) {
    // Psi(theta, phi) and -Psi give the same objective; pick the sign with a
    // nonnegative diagonal so that theta lands in [0, pi/2].
    Eigen::Matrix2cd psi = givens_block(std::hypot(ba, bb), std::atan2(bb, ba));
    if (psi(0, 0).real() < 0.0) psi = -psi;
    const double c = std::clamp(psi(0, 0).real(), 0.0, 1.0);
    plan.params.theta = std::acos(c);
    plan.params.phi = std::abs(psi(0, 1)) < 1e-12 ? 0.0 : std::arg(-psi(0, 1));
    plan.Psi = givens_block(plan.params.theta, plan.params.phi);
    plan.w = z_vector(1, 1, plan.params.theta, plan.params.phi);
    plan.predicted_gain = s.gain(plan.params.theta, plan.params.phi);
  }
  return plan;
}

struct ConditionReport {
  Vec3 lambdas;  // descending
  Vec3 w, u, v;
  double ratio = 0.0;  // (l2 - l3) / (l1 - l3)
  bool a2 = false;     // |u_1| <= tol
  bool a3 = false;     // |v_1| <= tol
  bool degenerate = false;
};

inline ConditionReport condition_diagnostics(const QuadSubproblem& q, double tol = 1e-10) {
  const SymEigen3 eg = sym_eigen3(q.M);
  ConditionReport rep;
  rep.lambdas = eg.values;
  rep.w = fix_sign(eg.vectors.col(0));
  rep.u = fix_sign(eg.vectors.col(1));
  rep.v = fix_sign(eg.vectors.col(2));
  const double spread = eg.values(0) - eg.values(2);
  rep.degenerate = spread <= tol * std::max(1.0, eg.values.cwiseAbs().maxCoeff());
  rep.ratio = rep.degenerate ? std::numeric_limits<double>::quiet_NaN()
                             : (eg.values(1) - eg.values(2)) / spread;
  rep.a2 = std::abs(rep.u(0)) <= tol;
  rep.a3 = std::abs(rep.v(0)) <= tol;
  return rep;
}

}  // namespace unijac
