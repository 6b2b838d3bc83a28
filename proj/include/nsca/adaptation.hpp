#ifndef NSCA_ADAPTATION_HPP
#define NSCA_ADAPTATION_HPP

#include "nsca/data.hpp"
#include "nsca/memory_bank.hpp"
#include "nsca/model.hpp"
#include "nsca/sfda_loss.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

namespace nsca {

/// Non-finite loss during adaptation, with the iteration it occurred at.
class NumericFailure : public NumericError {
 public:
  NumericFailure(const std::string& what, int epoch, long iteration)
      : NumericError(what + " (epoch " + std::to_string(epoch) + ", iteration " +
                     std::to_string(iteration) + ")"),
        epoch_(epoch),
        iteration_(iteration) {}
  int epoch() const { return epoch_; }
  long iteration() const { return iteration_; }

 private:
  int epoch_;
  long iteration_;
};

struct AdaptOptions {
  Eigen::Index neighbors = 5;
  double decay_base = 0.5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  Eigen::Index batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 0;
  MaskSettings mask;
  bool adaptive_encoding = true;  // false: q_j = s_j always
  double bank_momentum = 0;       // 0: hard replace
  /// When set, the pair factors of the first iteration are written here as CSV.
  std::optional<std::filesystem::path> pair_dump;
};

/// Per-sample quantities of one batch, read from a single bank snapshot.
struct BatchTerms {
  std::vector<Signature<double>> signatures;
  std::vector<ClassEncoding<double>> encodings;
};

BatchTerms compute_batch_terms(const MemoryBank<double>& bank,
                               std::span<const Eigen::Index> indices, Eigen::Index neighbors,
                               bool adaptive_encoding);

struct EpochSummary {
  int epoch = 0;           // 1-based
  double alpha = 1;        // alpha at the last iteration of the epoch
  double mean_loss = 0;
  long iterations = 0;     // global iteration count after the epoch
};

using EpochCallback = std::function<void(const EpochSummary&, const ModelParameters<double>&)>;

/// Builds the bank, then per batch: forward, bank update, signatures and encodings, pairwise
/// loss, backward, momentum step. Returns the final bank.
MemoryBank<double> adapt(ModelParameters<double>& model, UnlabeledView target,
                         const AdaptOptions& options, const EpochCallback& on_epoch = {});

void write_pair_dump(const std::filesystem::path& path, const MaskFactors<double>& f);

}  // namespace nsca

#endif  // NSCA_ADAPTATION_HPP
