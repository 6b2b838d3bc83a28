#ifndef NSCA_SFDA_LOSS_HPP
#define NSCA_SFDA_LOSS_HPP

#include "nsca/memory_bank.hpp"
#include "nsca/numerics.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace nsca {

/// Mean bank prediction over a neighborhood.
template <typename T>
struct Signature {
  Vec<T> values;
};

enum class EncodingSource { FromSignature, FromOwnPrediction };

/// Alignment target of a sample: its own bank prediction or its signature.
template <typename T>
struct ClassEncoding {
  Vec<T> values;
  EncodingSource source = EncodingSource::FromOwnPrediction;
};

/// alpha(t) = base^(t / iters_per_epoch), t counted globally across epochs.
struct DecaySchedule {
  double base = 0.5;
  long iters_per_epoch = 1;

  double alpha_at(long global_iteration) const {
    if (iters_per_epoch < 1) throw ShapeError("DecaySchedule: iters_per_epoch must be >= 1");
    return std::pow(base, static_cast<double>(global_iteration) /
                              static_cast<double>(iters_per_epoch));
  }
};

/// Which mask factors participate. All on is the full method.
struct MaskSettings {
  bool intra_class_diversity = true;  // m2
  bool inertia = true;                // gamma'
  bool class_scaling = true;          // w
  bool raw_sum = false;               // skip division by bs*(bs-1)
};

template <typename T>
Signature<T> signature(const MemoryBank<T>& bank, const NeighborSet<T>& neighbors) {
  if (neighbors.size() == 0) throw ShapeError("signature: empty neighborhood");
  const DenseMatrix<T> rows = bank.prediction_rows(neighbors.neighbor_indices);
  Vec<T> acc = Vec<T>::Zero(rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) acc += rows.row(r).transpose();
  return {acc / static_cast<T>(rows.rows())};
}

/// Lower-entropy candidate; an exact tie keeps the own prediction.
template <typename DP, typename T>
ClassEncoding<T> class_encoding(const Eigen::MatrixBase<DP>& own_prediction,
                                const Signature<T>& s) {
  if (own_prediction.size() != s.values.size())
    throw ShapeError("class_encoding: length mismatch");
  if (entropy_bits(s.values) < entropy_bits(own_prediction))
    return {s.values, EncodingSource::FromSignature};
  return {own_prediction.reshaped(), EncodingSource::FromOwnPrediction};
}

template <typename T>
T mask_m1(const Signature<T>& si, const Signature<T>& sj) {
  return T(1) - T(2) * dot(si.values, sj.values);
}

template <typename T>
T mask_m2(const Signature<T>& si, const Signature<T>& sj, T alpha) {
  return alpha * dot(si.values, sj.values);
}

/// exp(-H(q) / log2 C), in [1/e, 1].
template <typename T>
T confidence(const ClassEncoding<T>& q, Eigen::Index class_count) {
  if (class_count < 2) throw ShapeError("confidence: need at least 2 classes");
  return std::exp(-entropy_bits(q.values) / std::log2(static_cast<T>(class_count)));
}

template <typename T>
T effective_confidence(T gamma, T alpha) {
  return alpha + (T(1) - alpha) * gamma;
}

/// Per-sample 1 / (alpha + (1 - alpha) * C_k * C / B), k = argmax of the sample's encoding.
template <typename T>
std::vector<T> class_scaling(std::span<const ClassEncoding<T>> encodings, T alpha,
                             Eigen::Index class_count, Eigen::Index batch_size) {
  if (class_count < 2) throw ShapeError("class_scaling: need at least 2 classes");
  if (batch_size != static_cast<Eigen::Index>(encodings.size()))
    throw ShapeError("class_scaling: batch size must equal the number of encodings");
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(class_count), 0);
  std::vector<Eigen::Index> owner(encodings.size());
  for (std::size_t j = 0; j < encodings.size(); ++j) {
    owner[j] = argmax(encodings[j].values);
    ++counts[static_cast<std::size_t>(owner[j])];
  }
  std::vector<T> w(encodings.size());
  const T ratio = static_cast<T>(class_count) / static_cast<T>(batch_size);
  for (std::size_t j = 0; j < encodings.size(); ++j)
    w[j] = T(1) / (alpha + (T(1) - alpha) *
                               static_cast<T>(counts[static_cast<std::size_t>(owner[j])]) * ratio);
  return w;
}

/// Per-pair and per-column mask factors of one batch.
template <typename T>
struct MaskFactors {
  DenseMatrix<T> signature_dot;  // s_i . s_j
  DenseMatrix<T> m1;
  DenseMatrix<T> m2;
  Vec<T> gamma_prime;            // per column sample j
  Vec<T> w;                      // per column sample j
  DenseMatrix<T> combined;       // (m1 + m2) * gamma'_j * w_j, zero diagonal
};

template <typename T>
DenseMatrix<T> stack_rows(std::span<const Signature<T>> s) {
  DenseMatrix<T> out(static_cast<Eigen::Index>(s.size()),
                     s.empty() ? 0 : s.front().values.size());
  for (std::size_t i = 0; i < s.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = s[i].values;
  return out;
}

template <typename T>
DenseMatrix<T> stack_rows(std::span<const ClassEncoding<T>> q) {
  DenseMatrix<T> out(static_cast<Eigen::Index>(q.size()),
                     q.empty() ? 0 : q.front().values.size());
  for (std::size_t i = 0; i < q.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = q[i].values;
  return out;
}

template <typename T>
MaskFactors<T> mask_factors(std::span<const ClassEncoding<T>> encodings,
                            std::span<const Signature<T>> signatures, T alpha,
                            const MaskSettings& settings = {}) {
  const auto bs = static_cast<Eigen::Index>(encodings.size());
  if (static_cast<Eigen::Index>(signatures.size()) != bs)
    throw ShapeError("mask_factors: encodings and signatures differ in count");
  if (bs == 0) throw ShapeError("mask_factors: empty batch");
  const Eigen::Index classes = encodings.front().values.size();

  MaskFactors<T> f;
  const DenseMatrix<T> s = stack_rows(signatures);
  f.signature_dot = s * s.transpose();
  f.m1 = (T(1) - T(2) * f.signature_dot.array()).matrix();
  f.m2 = settings.intra_class_diversity ? DenseMatrix<T>(alpha * f.signature_dot)
                                        : DenseMatrix<T>::Zero(bs, bs);
  f.gamma_prime = Vec<T>::Ones(bs);
  if (settings.inertia)
    for (Eigen::Index j = 0; j < bs; ++j)
      f.gamma_prime(j) = effective_confidence(
          confidence(encodings[static_cast<std::size_t>(j)], classes), alpha);
  f.w = Vec<T>::Ones(bs);
  if (settings.class_scaling) {
    const auto w = class_scaling(encodings, alpha, classes, bs);
    f.w = Eigen::Map<const Vec<T>>(w.data(), bs);
  }
  const RowVec<T> column_scale = (f.gamma_prime.array() * f.w.array()).matrix().transpose();
  f.combined = ((f.m1 + f.m2).array().rowwise() * column_scale.array()).matrix();
  f.combined.diagonal().setZero();
  return f;
}

/// dL/dlogits for the current batch.
template <typename T>
struct LossGradient {
  DenseMatrix<T> grad_wrt_logits;
};

template <typename T>
struct LossResult {
  T loss = 0;
  LossGradient<T> grad;
  DenseMatrix<T> grad_wrt_predictions;
  MaskFactors<T> factors;
};

/// Pairwise alignment loss sum_{i != j} p_i . q_j * combined_ij, divided by bs*(bs-1) unless
/// raw_sum is set. Only the predictions P carry gradient; encodings, signatures and every
/// mask factor are constants of the iteration.
template <typename DP, typename T>
LossResult<T> batch_loss_and_grad(const Eigen::MatrixBase<DP>& predictions,
                                  std::span<const ClassEncoding<T>> encodings,
                                  std::span<const Signature<T>> signatures, T alpha,
                                  const MaskSettings& settings = {}) {
  const Eigen::Index bs = predictions.rows();
  if (bs < 2) throw ShapeError("batch_loss_and_grad: need at least 2 samples for pairs");
  if (static_cast<Eigen::Index>(encodings.size()) != bs)
    throw ShapeError("batch_loss_and_grad: one encoding per prediction row required");
  if (encodings.front().values.size() != predictions.cols())
    throw ShapeError("batch_loss_and_grad: class count mismatch");

  LossResult<T> r;
  r.factors = mask_factors(encodings, signatures, alpha, settings);
  const DenseMatrix<T> q = stack_rows(encodings);
  const T scale = settings.raw_sum ? T(1) : T(1) / static_cast<T>(bs * (bs - 1));

  // dL/dP_i = scale * sum_j combined_ij q_j
  r.grad_wrt_predictions = scale * (r.factors.combined * q);
  r.loss = (predictions.array() * r.grad_wrt_predictions.array()).sum();
  if (!std::isfinite(static_cast<double>(r.loss)))
    throw NumericError("batch_loss_and_grad: non-finite loss");

  // softmax Jacobian: dL/dz_i = p_i * (g_i - p_i . g_i)
  const Vec<T> inner = (predictions.array() * r.grad_wrt_predictions.array()).rowwise().sum();
  r.grad.grad_wrt_logits =
      (predictions.array() * (r.grad_wrt_predictions.colwise() - inner).array()).matrix();
  return r;
}

}  // namespace nsca

#endif  // NSCA_SFDA_LOSS_HPP
