#ifndef NSCA_MEMORY_BANK_HPP
#define NSCA_MEMORY_BANK_HPP

#include "nsca/model.hpp"
#include "nsca/numerics.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <span>
#include <vector>

namespace nsca {

/// The K nearest bank rows to a center sample, most similar first.
template <typename T>
struct NeighborSet {
  Eigen::Index center_index = 0;
  std::vector<Eigen::Index> neighbor_indices;
  std::vector<T> similarities;

  std::size_t size() const { return neighbor_indices.size(); }
};

/// Current feature and prediction of every target sample; row i is sample i.
///
/// Readers (knn, row copies) take a shared lock and writers (update) an exclusive one, so a
/// query never observes a half-applied update.
template <typename T>
class MemoryBank {
 public:
  MemoryBank(DenseMatrix<T> features, DenseMatrix<T> predictions)
      : features_(std::move(features)), predictions_(std::move(predictions)) {
    if (features_.rows() != predictions_.rows())
      throw ShapeError("MemoryBank: feature and prediction row counts differ");
    if (features_.rows() == 0) throw ShapeError("MemoryBank: empty target set");
    for (Eigen::Index i = 0; i < predictions_.rows(); ++i)
      if (!is_probability_vector(predictions_.row(i)))
        throw ShapeError("MemoryBank: prediction row " + std::to_string(i) +
                         " is not a probability vector");
    refresh_unit_rows(all_rows());
  }

  MemoryBank(const MemoryBank& other) {
    std::shared_lock lock(other.mutex_);
    features_ = other.features_;
    unit_features_ = other.unit_features_;
    predictions_ = other.predictions_;
  }
  MemoryBank& operator=(const MemoryBank& other) {
    if (this != &other) {
      std::scoped_lock lock(mutex_);
      std::shared_lock other_lock(other.mutex_);
      features_ = other.features_;
      unit_features_ = other.unit_features_;
      predictions_ = other.predictions_;
    }
    return *this;
  }

  /// One full forward pass over the target inputs, rows in dataset order.
  template <typename Derived>
  static MemoryBank build(const ModelParameters<T>& model,
                          const Eigen::MatrixBase<Derived>& target_inputs) {
    if (target_inputs.rows() == 0) throw ShapeError("MemoryBank::build: empty target set");
    auto out = forward(model, target_inputs);
    return MemoryBank(std::move(out.features), std::move(out.predictions));
  }

  Eigen::Index sample_count() const { return features_.rows(); }
  Eigen::Index feature_dim() const { return features_.cols(); }
  Eigen::Index class_count() const { return predictions_.cols(); }

  /// Writes exactly the given rows. momentum 0 replaces them; otherwise
  /// stored = momentum * stored + (1 - momentum) * new.
  template <typename DF, typename DP>
  void update(std::span<const Eigen::Index> indices, const Eigen::MatrixBase<DF>& features,
              const Eigen::MatrixBase<DP>& predictions, T momentum = T(0)) {
    const auto n = static_cast<Eigen::Index>(indices.size());
    if (!(momentum >= 0 && momentum < 1))
      throw ShapeError("MemoryBank::update: momentum must lie in [0, 1)");
    if (features.rows() != n || predictions.rows() != n)
      throw ShapeError("MemoryBank::update: row count does not match index count");
    if (features.cols() != feature_dim() || predictions.cols() != class_count())
      throw ShapeError("MemoryBank::update: column count mismatch");
    std::vector<Eigen::Index> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ShapeError("MemoryBank::update: duplicate index");
    for (Eigen::Index i : sorted)
      if (i < 0 || i >= sample_count())
        throw ShapeError("MemoryBank::update: index " + std::to_string(i) + " out of range");
    require_finite(features, "MemoryBank::update features");
    for (Eigen::Index r = 0; r < n; ++r)
      if (!is_probability_vector(predictions.row(r)))
        throw ShapeError("MemoryBank::update: prediction row is not a probability vector");

    std::unique_lock lock(mutex_);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index row = indices[static_cast<std::size_t>(r)];
      if (momentum == T(0)) {
        features_.row(row) = features.row(r);
        predictions_.row(row) = predictions.row(r);
      } else {
        features_.row(row) = momentum * features_.row(row) + (T(1) - momentum) * features.row(r);
        predictions_.row(row) =
            momentum * predictions_.row(row) + (T(1) - momentum) * predictions.row(r);
      }
    }
    refresh_unit_rows(std::vector<Eigen::Index>(indices.begin(), indices.end()));
  }

  /// Exact linear scan by cosine similarity; ties go to the lower index; the center is excluded.
  /// A zero feature row has similarity 0 to everything.
  NeighborSet<T> knn(Eigen::Index center_index, Eigen::Index k) const {
    std::shared_lock lock(mutex_);
    const Eigen::Index n = sample_count();
    if (center_index < 0 || center_index >= n)
      throw ShapeError("MemoryBank::knn: center index out of range");
    if (k < 1 || k > n - 1)
      throw ShapeError("MemoryBank::knn: K=" + std::to_string(k) + " outside [1, " +
                       std::to_string(n - 1) + "]");
    // Sequential dot per row: identical rows must give bit-identical similarities.
    Vec<T> sims(n);
    for (Eigen::Index j = 0; j < n; ++j)
      sims(j) = dot(unit_features_.row(j), unit_features_.row(center_index));
    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != center_index) order.push_back(j);
    auto closer = [&](Eigen::Index a, Eigen::Index b) {
      return sims(a) > sims(b) || (sims(a) == sims(b) && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
    NeighborSet<T> out;
    out.center_index = center_index;
    out.neighbor_indices.assign(order.begin(), order.begin() + k);
    for (Eigen::Index j : out.neighbor_indices) out.similarities.push_back(sims(j));
    return out;
  }

  DenseMatrix<T> prediction_rows(std::span<const Eigen::Index> rows) const {
    std::shared_lock lock(mutex_);
    return predictions_(std::vector<Eigen::Index>(rows.begin(), rows.end()),
                        Eigen::all);
  }
  RowVec<T> prediction(Eigen::Index row) const {
    std::shared_lock lock(mutex_);
    return predictions_.row(row);
  }
  RowVec<T> feature(Eigen::Index row) const {
    std::shared_lock lock(mutex_);
    return features_.row(row);
  }
  DenseMatrix<T> features() const {
    std::shared_lock lock(mutex_);
    return features_;
  }
  DenseMatrix<T> predictions() const {
    std::shared_lock lock(mutex_);
    return predictions_;
  }

  /// CSV with columns sample_index, f0.., p0..
  void write_snapshot_csv(const std::filesystem::path& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "sample_index";
    for (Eigen::Index c = 0; c < features_.cols(); ++c) out << ",f" << c;
    for (Eigen::Index c = 0; c < predictions_.cols(); ++c) out << ",p" << c;
    out << '\n';
    out.precision(17);
    for (Eigen::Index r = 0; r < features_.rows(); ++r) {
      out << r;
      for (Eigen::Index c = 0; c < features_.cols(); ++c) out << ',' << features_(r, c);
      for (Eigen::Index c = 0; c < predictions_.cols(); ++c) out << ',' << predictions_(r, c);
      out << '\n';
    }
  }

  friend bool operator==(const MemoryBank& a, const MemoryBank& b) {
    return a.features() == b.features() && a.predictions() == b.predictions();
  }

 private:
  std::vector<Eigen::Index> all_rows() const {
    std::vector<Eigen::Index> r(static_cast<std::size_t>(features_.rows()));
    std::iota(r.begin(), r.end(), Eigen::Index{0});
    return r;
  }

  void refresh_unit_rows(const std::vector<Eigen::Index>& rows) {
    if (unit_features_.rows() != features_.rows() || unit_features_.cols() != features_.cols())
      unit_features_.resize(features_.rows(), features_.cols());
    for (Eigen::Index r : rows) {
      const T norm = std::sqrt(dot(features_.row(r), features_.row(r)));
      if (norm > T(0))
        unit_features_.row(r) = features_.row(r) / norm;
      else
        unit_features_.row(r).setZero();
    }
  }

  DenseMatrix<T> features_;
  DenseMatrix<T> unit_features_;
  DenseMatrix<T> predictions_;
  mutable std::shared_mutex mutex_;
};

}  // namespace nsca

#endif  // NSCA_MEMORY_BANK_HPP
