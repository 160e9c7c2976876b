#pragma once

#include <Eigen/QR>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "unijac/tensor.hpp"

namespace unijac {

/// One square unitary factor per mode.
using UnitaryTuple = std::vector<ComplexMatrix>;

inline double unitarity_error(const ComplexMatrix& u) {
  const auto n = u.cols();
  return (u.adjoint() * u - ComplexMatrix::Identity(n, n)).norm();
}

inline bool is_unitary(const ComplexMatrix& u, double tol = 1e-10) {
  return u.rows() == u.cols() && unitarity_error(u) <= tol;
}

/// (P - P^H) / 2
inline ComplexMatrix skew(const ComplexMatrix& p) {
  if (p.rows() != p.cols()) throw std::invalid_argument("skew: matrix is not square");
  return (p - p.adjoint()) / 2.0;
}

/// (I - X X^H) xi + X skew(X^H xi)
inline ComplexMatrix proj_tangent(const ComplexMatrix& x, const ComplexMatrix& xi) {
  if (x.rows() != xi.rows() || x.cols() != xi.cols()) {
    throw std::invalid_argument("proj_tangent: shape mismatch");
  }
  const ComplexMatrix xh_xi = x.adjoint() * xi;
  return xi - x * xh_xi + x * skew(xh_xi);
}

inline ComplexMatrix riemannian_grad_stiefel(const ComplexMatrix& euclid_grad,
                                             const ComplexMatrix& x) {
  return proj_tangent(x, euclid_grad);
}

struct UnitaryGradient {
  ComplexMatrix grad;
  ComplexMatrix lambda;  // skew-Hermitian, grad = U * lambda
};

inline UnitaryGradient riemannian_grad_unitary(const ComplexMatrix& euclid_grad,
                                               const ComplexMatrix& u,
                                               double tol = 1e-8) {
  if (euclid_grad.rows() != u.rows() || euclid_grad.cols() != u.cols()) {
    throw std::invalid_argument("riemannian_grad_unitary: shape mismatch");
  }
  if (!is_unitary(u, tol)) {
    throw std::invalid_argument("riemannian_grad_unitary: U is not unitary");
  }
  UnitaryGradient out;
  out.lambda = skew(u.adjoint() * euclid_grad);
  out.grad = u * out.lambda;
  return out;
}

/// Thin Q factor of `a` with a positive real diagonal in R.
inline ComplexMatrix q_factor(const ComplexMatrix& a) {
  const auto n = a.rows();
  const auto r = a.cols();
  if (r > n) throw std::invalid_argument("q_factor: more columns than rows");
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(n, r);
  const ComplexMatrix& packed = qr.matrixQR();
  const double scale = std::max(1.0, a.norm());
  for (Eigen::Index k = 0; k < r; ++k) {
    const Complex d = packed(k, k);
    if (std::abs(d) <= 1e-13 * scale) {
      throw std::runtime_error("q_factor: matrix is rank deficient");
    }
    q.col(k) *= d / std::abs(d);
  }
  return q;
}

inline ComplexMatrix qr_retract(const ComplexMatrix& x, const ComplexMatrix& xi) {
  if (x.rows() != xi.rows() || x.cols() != xi.cols()) {
    throw std::invalid_argument("qr_retract: shape mismatch");
  }
  return q_factor(x + xi);
}

/// Haar-distributed unitary matrix: Q factor of a complex Gaussian matrix with
/// the phases of R's diagonal absorbed.
template <class Rng>
ComplexMatrix haar_unitary(Index n, Rng& rng, bool real = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double re = normal(rng);
      const double im = real ? 0.0 : normal(rng);
      g(r, c) = Complex(re, im);
    }
  }
  return q_factor(g);
}

/// Random tangent vector at X on the Stiefel manifold.
template <class Rng>
ComplexMatrix random_tangent(const ComplexMatrix& x, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix xi(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < xi.cols(); ++c)
    for (Eigen::Index r = 0; r < xi.rows(); ++r)
      xi(r, c) = Complex(normal(rng), normal(rng));
  return proj_tangent(x, xi);
}

}  // namespace unijac
