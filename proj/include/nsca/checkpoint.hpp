#ifndef NSCA_CHECKPOINT_HPP
#define NSCA_CHECKPOINT_HPP

#include "nsca/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace nsca {

/// Unreadable, malformed or incompatible checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParameters<double> params;
  std::string config_hash;
};

/// JSON document: format tag, version, config hash and one entry per layer.
void save_checkpoint(const std::filesystem::path& path, const ModelParameters<double>& params,
                     const std::string& config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nsca

#endif  // NSCA_CHECKPOINT_HPP
