#ifndef NSCA_NUMERICS_HPP
#define NSCA_NUMERICS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace nsca {

static constexpr auto DYN = Eigen::Dynamic;

/// Row-major dense matrix; one sample per row.
template <typename T>
using DenseMatrix = Eigen::Matrix<T, DYN, DYN, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, DYN, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, DYN>;

using Matrix = DenseMatrix<double>;
using Vector = Vec<double>;

/// Raised when a value that must be finite is not.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on shape or precondition violations.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* what) {
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (!std::isfinite(static_cast<double>(x(r, c))))
        throw NumericError(std::string(what) + ": non-finite value at index (" +
                           std::to_string(r) + ", " + std::to_string(c) + ")");
}

/// Max-shifted softmax of a logit vector. Requires at least two classes.
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using T = typename Derived::Scalar;
  if (logits.size() < 2) throw ShapeError("softmax: need at least 2 logits");
  for (Eigen::Index k = 0; k < logits.size(); ++k)
    if (!std::isfinite(static_cast<double>(logits.reshaped()(k))))
      throw NumericError("softmax: non-finite logit at index " + std::to_string(k));
  Vec<T> e = (logits.reshaped().array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Row-wise softmax of a logit matrix.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using T = typename Derived::Scalar;
  if (logits.cols() < 2) throw ShapeError("softmax_rows: need at least 2 columns");
  require_finite(logits, "softmax_rows");
  DenseMatrix<T> out = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

/// Shannon entropy in bits, with 0 log 0 taken as 0.
template <typename Derived>
typename Derived::Scalar entropy_bits(const Eigen::MatrixBase<Derived>& p) {
  using T = typename Derived::Scalar;
  T h = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const T pk = p.reshaped()(k);
    if (pk > 0) h -= pk * std::log2(pk);
  }
  return h < T(0) ? T(0) : h;
}

template <typename DA, typename DB>
typename DA::Scalar dot(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.size() != b.size())
    throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  typename DA::Scalar acc = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) acc += a.reshaped()(k) * b.reshaped()(k);
  return acc;
}

template <typename DA, typename DB>
typename DA::Scalar cosine_similarity(const Eigen::MatrixBase<DA>& a,
                                      const Eigen::MatrixBase<DB>& b) {
  using T = typename DA::Scalar;
  const T na = a.norm();
  const T nb = b.norm();
  if (na == T(0) || nb == T(0)) throw ShapeError("cosine_similarity: zero-norm input");
  const T c = dot(a, b) / (na * nb);
  return std::clamp(c, T(-1), T(1));
}

/// Central-difference gradient of a scalar function. Test oracle.
template <typename T>
Vec<T> finite_diff_gradient(const std::function<T(const Vec<T>&)>& fn, const Vec<T>& point,
                            T epsilon) {
  Vec<T> grad(point.size());
  Vec<T> x = point;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    x(k) = point(k) + epsilon;
    const T up = fn(x);
    x(k) = point(k) - epsilon;
    const T down = fn(x);
    x(k) = point(k);
    grad(k) = (up - down) / (2 * epsilon);
  }
  return grad;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v.reshaped()(k) > v.reshaped()(best)) best = k;
  return best;
}

/// True when p lies on the simplex within `tol`.
template <typename Derived>
bool is_probability_vector(const Eigen::MatrixBase<Derived>& p, double tol = 1e-9) {
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double v = static_cast<double>(p.reshaped()(k));
    if (!std::isfinite(v) || v < -tol || v > 1 + tol) return false;
  }
  return std::abs(static_cast<double>(p.sum()) - 1.0) <= tol;
}

}  // namespace nsca

#endif  // NSCA_NUMERICS_HPP
