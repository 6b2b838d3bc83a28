#ifndef NSCA_DATA_HPP
#define NSCA_DATA_HPP

#include "nsca/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nsca {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs with labels in [0, class_count). Every class has at least one sample.
struct LabeledDataset {
  Matrix inputs;
  std::vector<int> labels;
  int class_count = 0;
  /// Original label strings for datasets read from CSV; index = dense label.
  std::vector<std::string> label_names;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  std::vector<int> class_sizes() const;
  void validate() const;
};

/// Inputs only. The adaptation path receives this view so target labels stay out of reach.
struct UnlabeledView {
  const Matrix* inputs = nullptr;

  explicit UnlabeledView(const LabeledDataset& d) : inputs(&d.inputs) {}
  explicit UnlabeledView(const Matrix& m) : inputs(&m) {}
  Eigen::Index size() const { return inputs->rows(); }
};

struct ShiftSpec {
  double rotation_angle = 0.0;  // radians, applied to input dims 0 and 1
  std::vector<double> translation;  // empty = none
  double feature_noise_std = 0.0;
  std::vector<double> class_imbalance_ratios;  // empty = all ones
  std::uint64_t seed = 0;
};

/// C isotropic unit-variance clusters.
///
/// Class k has mean separation * (cos(2 pi k / C), sin(2 pi k / C), 0.75 * e_{k mod (d-2)}):
/// a ring in the first two dimensions plus a per-class code on the remaining ones, so a
/// rotation of the first two dimensions moves clusters across source decision boundaries
/// while target clusters stay separable.
LabeledDataset make_gaussian_mixture(int class_count, int per_class_count, int dim,
                                     double separation, std::uint64_t seed);

/// Rotation, translation and noise on the inputs, then per-class resampling.
LabeledDataset apply_shift(const LabeledDataset& dataset, const ShiftSpec& spec);

/// Reads a header-first numeric CSV. Labels are re-indexed densely in order of first appearance.
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column);
void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path,
              const std::string& label_column = "label");

struct Batch {
  std::vector<Eigen::Index> indices;
  Matrix inputs;
};

/// Shuffled minibatches for one epoch. The permutation depends only on (seed, epoch);
/// a trailing batch with fewer than two samples is dropped.
std::vector<Batch> batches(const Matrix& inputs, Eigen::Index batch_size, std::uint64_t seed,
                           std::uint64_t epoch);

/// Deterministic split into (train, validation) with `validation_fraction` of every class held out.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& dataset,
                                                           double validation_fraction,
                                                           std::uint64_t seed);

}  // namespace nsca

#endif  // NSCA_DATA_HPP
