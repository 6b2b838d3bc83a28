#include "nsca/adaptation.hpp"

#include <cmath>
#include <fstream>

namespace nsca {

BatchTerms compute_batch_terms(const MemoryBank<double>& bank,
                               std::span<const Eigen::Index> indices, Eigen::Index neighbors,
                               bool adaptive_encoding) {
  BatchTerms t;
  t.signatures.reserve(indices.size());
  t.encodings.reserve(indices.size());
  for (Eigen::Index idx : indices) {
    const auto s = signature(bank, bank.knn(idx, neighbors));
    if (adaptive_encoding)
      t.encodings.push_back(class_encoding(bank.prediction(idx), s));
    else
      t.encodings.push_back({s.values, EncodingSource::FromSignature});
    t.signatures.push_back(s);
  }
  return t;
}

void write_pair_dump(const std::filesystem::path& path, const MaskFactors<double>& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "i,j,sig_dot,m1,m2,gamma_prime_j,w_j,combined\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < f.combined.rows(); ++i)
    for (Eigen::Index j = 0; j < f.combined.cols(); ++j) {
      if (i == j) continue;
      out << i << ',' << j << ',' << f.signature_dot(i, j) << ',' << f.m1(i, j) << ','
          << f.m2(i, j) << ',' << f.gamma_prime(j) << ',' << f.w(j) << ',' << f.combined(i, j)
          << '\n';
    }
}

MemoryBank<double> adapt(ModelParameters<double>& model, UnlabeledView target,
                         const AdaptOptions& options, const EpochCallback& on_epoch) {
  if (options.neighbors < 1) throw ShapeError("adapt: K must be >= 1");
  if (!(options.decay_base > 0 && options.decay_base < 1))
    throw ShapeError("adapt: decay base must lie in (0, 1)");
  if (!(options.bank_momentum >= 0 && options.bank_momentum < 1))
    throw ShapeError("adapt: bank momentum must lie in [0, 1)");
  if (target.size() < options.neighbors + 1)
    throw ShapeError("adapt: target set must hold at least K + 1 samples");

  auto bank = MemoryBank<double>::build(model, *target.inputs);
  auto state = OptimizerState<double>::for_model(model, options.learning_rate, options.momentum);
  const auto iters_per_epoch = static_cast<long>(
      batches(*target.inputs, options.batch_size, options.seed, 0).size());
  const DecaySchedule schedule{options.decay_base, std::max(1L, iters_per_epoch)};

  long iteration = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    double loss_sum = 0;
    long steps = 0;
    double alpha = schedule.alpha_at(iteration);
    for (const auto& batch : batches(*target.inputs, options.batch_size, options.seed,
                                     static_cast<std::uint64_t>(epoch))) {
      alpha = schedule.alpha_at(iteration);
      const auto fwd = forward(model, batch.inputs);
      bank.update(batch.indices, fwd.features, fwd.predictions, options.bank_momentum);
      const auto terms =
          compute_batch_terms(bank, batch.indices, options.neighbors, options.adaptive_encoding);

      LossResult<double> result;
      try {
        result = batch_loss_and_grad(fwd.predictions,
                                     std::span<const ClassEncoding<double>>(terms.encodings),
                                     std::span<const Signature<double>>(terms.signatures), alpha,
                                     options.mask);
      } catch (const NumericError& e) {
        throw NumericFailure(e.what(), epoch, iteration);
      }
      if (options.pair_dump && iteration == 0) write_pair_dump(*options.pair_dump, result.factors);

      const auto grads =
          backward_from_logit_grad(model, batch.inputs, fwd.cache, result.grad.grad_wrt_logits);
      sgd_momentum_step(model, grads, state);
      for (const auto& l : model.extractor)
        if (!l.weight.allFinite()) throw NumericFailure("non-finite parameters", epoch, iteration);
      if (!model.classifier.weight.allFinite())
        throw NumericFailure("non-finite parameters", epoch, iteration);

      loss_sum += result.loss;
      ++steps;
      ++iteration;
    }
    if (on_epoch)
      on_epoch({epoch, alpha, steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0, iteration},
               model);
  }
  return bank;
}

}  // namespace nsca
