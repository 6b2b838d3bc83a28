#include "nsca/pretrain.hpp"

#include <cmath>

namespace nsca {

Matrix smoothed_cross_entropy_grad(const Matrix& predictions, std::span<const int> labels,
                                   double smoothing, double* loss_out) {
  const Eigen::Index bs = predictions.rows();
  const Eigen::Index classes = predictions.cols();
  Matrix target = Matrix::Constant(bs, classes, smoothing / static_cast<double>(classes));
  for (Eigen::Index i = 0; i < bs; ++i) target(i, labels[static_cast<std::size_t>(i)]) += 1.0 - smoothing;
  if (loss_out) {
    double loss = 0;
    for (Eigen::Index i = 0; i < bs; ++i)
      for (Eigen::Index k = 0; k < classes; ++k)
        if (target(i, k) > 0) loss -= target(i, k) * std::log(std::max(predictions(i, k), 1e-300));
    *loss_out = loss / static_cast<double>(bs);
  }
  return (predictions - target) / static_cast<double>(bs);
}

double accuracy(const ModelParameters<double>& params, const LabeledDataset& data) {
  if (data.size() == 0) return 0;
  const auto out = forward(params, data.inputs);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (argmax(out.predictions.row(i)) == data.labels[static_cast<std::size_t>(i)]) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(data.size());
}

PretrainReport source_pretrain(ModelParameters<double>& params, const LabeledDataset& train,
                               const LabeledDataset* validation, OptimizerState<double>& state,
                               const PretrainOptions& options) {
  if (train.size() == 0) throw DataError("source_pretrain: empty dataset");
  train.validate();
  if (train.class_count != params.class_count())
    throw ShapeError("source_pretrain: dataset class count does not match the model");

  PretrainReport report;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double loss_sum = 0;
    int steps = 0;
    for (const auto& batch :
         batches(train.inputs, options.batch_size, options.seed, static_cast<std::uint64_t>(epoch))) {
      std::vector<int> labels;
      labels.reserve(batch.indices.size());
      for (auto i : batch.indices) labels.push_back(train.labels[static_cast<std::size_t>(i)]);
      const auto fwd = forward(params, batch.inputs);
      double loss = 0;
      const Matrix grad = smoothed_cross_entropy_grad(fwd.predictions, labels,
                                                      options.label_smoothing, &loss);
      const auto g = backward_from_logit_grad(params, batch.inputs, fwd.cache, grad);
      sgd_momentum_step(params, g, state);
      if (!std::isfinite(loss) || !params.flatten().allFinite())
        throw NumericError("source_pretrain: non-finite loss or parameters in epoch " +
                           std::to_string(epoch + 1));
      loss_sum += loss;
      ++steps;
    }
    report.final_loss = steps > 0 ? loss_sum / steps : 0;
  }
  report.train_accuracy = accuracy(params, train);
  if (validation && validation->size() > 0)
    report.validation_accuracy = accuracy(params, *validation);
  return report;
}

}  // namespace nsca
