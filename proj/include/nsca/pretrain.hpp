#ifndef NSCA_PRETRAIN_HPP
#define NSCA_PRETRAIN_HPP

#include "nsca/data.hpp"
#include "nsca/model.hpp"

#include <cstdint>
#include <span>

namespace nsca {

struct PretrainOptions {
  int epochs = 20;
  Eigen::Index batch_size = 64;
  double label_smoothing = 0.1;
  std::uint64_t seed = 0;
};

struct PretrainReport {
  double train_accuracy = 0;       // percent
  double validation_accuracy = 0;  // percent; 0 when no validation set was given
  double final_loss = 0;
};

/// Smoothed cross-entropy gradient w.r.t. logits, averaged over the batch.
Matrix smoothed_cross_entropy_grad(const Matrix& predictions, std::span<const int> labels,
                                   double smoothing, double* loss_out = nullptr);

/// Supervised training on labeled source data with label-smoothed cross-entropy.
PretrainReport source_pretrain(ModelParameters<double>& params, const LabeledDataset& train,
                               const LabeledDataset* validation, OptimizerState<double>& state,
                               const PretrainOptions& options);

/// Percentage of rows whose argmax prediction matches the label.
double accuracy(const ModelParameters<double>& params, const LabeledDataset& data);

}  // namespace nsca

#endif  // NSCA_PRETRAIN_HPP
