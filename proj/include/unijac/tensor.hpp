#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace unijac {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using Index = std::size_t;

/// Dense complex tensor of order d >= 1, stored first-index-fastest
/// (generalized column-major): offset(q) = q_0 + n_0 (q_1 + n_1 (q_2 + ...)).
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<Index> dims)
      : dims_(std::move(dims)) {
    check_dims();
    data_.assign(product(), Complex{0.0, 0.0});
  }

  DenseTensor(std::vector<Index> dims, std::vector<Complex> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != product()) {
      std::ostringstream msg;
      msg << "DenseTensor: data length " << data_.size()
          << " does not match product of dims " << product();
      throw std::invalid_argument(msg.str());
    }
    for (const Complex& z : data_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw std::invalid_argument("DenseTensor: non-finite entry");
      }
    }
  }

  Index order() const { return dims_.size(); }
  const std::vector<Index>& dims() const { return dims_; }
  Index dim(Index p) const { return dims_.at(p); }
  Index size() const { return data_.size(); }

  std::span<const Complex> data() const { return data_; }
  std::span<Complex> data() { return data_; }

  Complex& operator[](Index k) { return data_[k]; }
  const Complex& operator[](Index k) const { return data_[k]; }

  Index offset(std::span<const Index> idx) const {
    Index off = 0;
    for (Index p = order(); p-- > 0;) off = off * dims_[p] + idx[p];
    return off;
  }

  Complex& at(std::span<const Index> idx) { return data_[offset(idx)]; }
  const Complex& at(std::span<const Index> idx) const {
    return data_[offset(idx)];
  }
  Complex& at(std::initializer_list<Index> idx) {
    return at(std::span<const Index>(idx.begin(), idx.size()));
  }
  const Complex& at(std::initializer_list<Index> idx) const {
    return at(std::span<const Index>(idx.begin(), idx.size()));
  }

  /// Product of dims before / after mode p.
  Index stride(Index p) const {
    Index s = 1;
    for (Index k = 0; k < p; ++k) s *= dims_[k];
    return s;
  }

  /// Decode a flat offset into a multi-index.
  void unravel(Index off, std::vector<Index>& idx) const {
    idx.resize(order());
    for (Index p = 0; p < order(); ++p) {
      idx[p] = off % dims_[p];
      off /= dims_[p];
    }
  }

  bool is_real(double tol = 0.0) const {
    for (const Complex& z : data_) {
      if (std::abs(z.imag()) > tol) return false;
    }
    return true;
  }

  static DenseTensor from_matrix(const ComplexMatrix& m) {
    DenseTensor t({static_cast<Index>(m.rows()), static_cast<Index>(m.cols())});
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        t.data_[static_cast<Index>(r + m.rows() * c)] = m(r, c);
    return t;
  }

  ComplexMatrix to_matrix() const {
    if (order() != 2) throw std::invalid_argument("to_matrix: order != 2");
    ComplexMatrix m(static_cast<Eigen::Index>(dims_[0]),
                    static_cast<Eigen::Index>(dims_[1]));
    for (Index c = 0; c < dims_[1]; ++c)
      for (Index r = 0; r < dims_[0]; ++r) m(r, c) = data_[r + dims_[0] * c];
    return m;
  }

 private:
  void check_dims() const {
    if (dims_.empty()) throw std::invalid_argument("DenseTensor: order must be >= 1");
    for (Index n : dims_) {
      if (n == 0) throw std::invalid_argument("DenseTensor: zero dimension");
    }
  }
  Index product() const {
    return std::accumulate(dims_.begin(), dims_.end(), Index{1},
                           std::multiplies<>());
  }

  std::vector<Index> dims_;
  std::vector<Complex> data_;
};

/// (T x_p X)_{..j..} = sum_q T_{..q..} X(j, q).  Modes are 0-based.
inline DenseTensor mode_product(const DenseTensor& t, const ComplexMatrix& x,
                                Index p) {
  if (p >= t.order()) {
    std::ostringstream msg;
    msg << "mode_product: mode " << p << " out of range for order " << t.order();
    throw std::invalid_argument(msg.str());
  }
  const Index np = t.dim(p);
  if (static_cast<Index>(x.cols()) != np) {
    std::ostringstream msg;
    msg << "mode_product: matrix has " << x.cols() << " columns, mode " << p
        << " has dimension " << np;
    throw std::invalid_argument(msg.str());
  }
  std::vector<Index> out_dims = t.dims();
  out_dims[p] = static_cast<Index>(x.rows());
  DenseTensor out(out_dims);

  const Index left = t.stride(p);
  const Index right = t.size() / (left * np);
  const Index rows = out_dims[p];
  const auto src = t.data();
  auto dst = out.data();
  for (Index r = 0; r < right; ++r) {
    for (Index q = 0; q < np; ++q) {
      const Complex* in = &src[left * (q + np * r)];
      for (Index j = 0; j < rows; ++j) {
        const Complex w = x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(q));
        if (w == Complex{}) continue;
        Complex* o = &dst[left * (j + rows * r)];
        for (Index l = 0; l < left; ++l) o[l] += in[l] * w;
      }
    }
  }
  return out;
}

/// In-place mixing of slices i and j along mode p:
///   T_i <- m(0,0) T_i + m(0,1) T_j,  T_j <- m(1,0) T_i + m(1,1) T_j.
/// Equivalent to T x_p G where G is the identity with the 2x2 block m at (i, j).
inline void mix_slices(DenseTensor& t, Index p, Index i, Index j,
                       const Eigen::Matrix2cd& m) {
  const Index np = t.dim(p);
  if (i >= np || j >= np || i == j) {
    throw std::invalid_argument("mix_slices: invalid index pair");
  }
  const Index left = t.stride(p);
  const Index right = t.size() / (left * np);
  auto d = t.data();
  for (Index r = 0; r < right; ++r) {
    Complex* a = &d[left * (i + np * r)];
    Complex* b = &d[left * (j + np * r)];
    for (Index l = 0; l < left; ++l) {
      const Complex ai = a[l];
      const Complex bj = b[l];
      a[l] = m(0, 0) * ai + m(0, 1) * bj;
      b[l] = m(1, 0) * ai + m(1, 1) * bj;
    }
  }
}

/// (T_{11..1}, T_{22..2}, ..., T_{nn..n}) with n = min_p dims[p].
inline std::vector<Complex> diag_vector(const DenseTensor& t) {
  Index n = t.dim(0);
  for (Index p = 1; p < t.order(); ++p) n = std::min(n, t.dim(p));
  Index step = 0;
  for (Index p = 0; p < t.order(); ++p) step += t.stride(p);
  std::vector<Complex> out(n);
  for (Index q = 0; q < n; ++q) out[q] = t[q * step];
  return out;
}

/// Entries with q_p < r_p for every mode p.
inline DenseTensor subtensor(const DenseTensor& t, std::span<const Index> r) {
  if (r.size() != t.order()) {
    throw std::invalid_argument("subtensor: rank list length != tensor order");
  }
  for (Index p = 0; p < t.order(); ++p) {
    if (r[p] < 1 || r[p] > t.dim(p)) {
      std::ostringstream msg;
      msg << "subtensor: rank " << r[p] << " out of range [1, " << t.dim(p)
          << "] in mode " << p;
      throw std::invalid_argument(msg.str());
    }
  }
  DenseTensor out(std::vector<Index>(r.begin(), r.end()));
  std::vector<Index> idx;
  for (Index k = 0; k < out.size(); ++k) {
    out.unravel(k, idx);
    out[k] = t.at(idx);
  }
  return out;
}

inline double frobenius_norm_sq(const DenseTensor& t) {
  double s = 0.0;
  for (const Complex& z : t.data()) s += std::norm(z);
  return s;
}

/// Re tr(X^H Y).
inline double real_inner(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument("real_inner: shape mismatch");
  }
  double s = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      s += x(r, c).real() * y(r, c).real() + x(r, c).imag() * y(r, c).imag();
  return s;
}

/// B_{I,J} == conj(B_{J,I}) for the split of the 2*gamma indices into two
/// blocks of gamma, entrywise within tol.
inline bool is_hermitian_tensor(const DenseTensor& b, Index gamma,
                                double tol = 1e-10) {
  if (gamma == 0 || b.order() != 2 * gamma) {
    throw std::invalid_argument(
        "is_hermitian_tensor: order must equal 2*gamma (even)");
  }
  for (Index p = 1; p < b.order(); ++p) {
    if (b.dim(p) != b.dim(0)) {
      throw std::invalid_argument("is_hermitian_tensor: dims must be equal");
    }
  }
  std::vector<Index> idx;
  std::vector<Index> swapped(b.order());
  for (Index k = 0; k < b.size(); ++k) {
    b.unravel(k, idx);
    for (Index m = 0; m < gamma; ++m) {
      swapped[m] = idx[m + gamma];
      swapped[m + gamma] = idx[m];
    }
    if (std::abs(b[k] - std::conj(b.at(swapped))) > tol) return false;
  }
  return true;
}

}  // namespace unijac
