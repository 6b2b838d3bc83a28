#ifndef NSCA_EXPERIMENT_HPP
#define NSCA_EXPERIMENT_HPP

#include "nsca/adaptation.hpp"
#include "nsca/data.hpp"
#include "nsca/model.hpp"
#include "nsca/pretrain.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nsca {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  // CSV mode when both paths are set; synthetic otherwise.
  std::string source_csv;
  std::string target_csv;
  std::string label_column = "label";

  int classes = 6;
  int dim = 8;
  int per_class_source = 100;
  int per_class_target = 100;
  double separation = 3.5;
  double rotation_deg = 45.0;
  double noise = 0.3;
  std::vector<double> target_imbalance = {0.25, 1, 1, 1, 1, 1};

  bool synthetic() const { return source_csv.empty() || target_csv.empty(); }
};

struct AblationSwitches {
  bool disable_m2 = false;
  bool disable_inertia = false;
  bool disable_class_scaling = false;
  bool disable_adaptive_encoding = false;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<Eigen::Index> hidden = {64, 32};
  int neighbors = 5;
  double decay_base = 0.5;
  double bank_momentum = 0;  // 0 replaces bank rows; > 0 blends them
  double learning_rate = 0.5;
  double source_learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs_source = 20;
  int epochs_adapt = 20;
  std::uint64_t seed = 0;
  int seeds = 1;  // runs use seed, seed + 1, ..., seed + seeds - 1
  AblationSwitches ablation;
  bool raw_sum = false;
  std::string checkpoint;  // optional pre-trained source model
  std::string out_dir = "out";
  bool diagnostics = false;

  void validate() const;
  AdaptOptions adapt_options(std::uint64_t run_seed) const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// FNV-1a over the canonical JSON of everything except output-only fields.
std::string config_hash(const ExperimentConfig& c);

/// Accuracy breakdown in percent.
struct Evaluation {
  double overall = 0;
  std::vector<double> per_class;
  double class_average = 0;  // unweighted mean of per_class
};

Evaluation evaluate_predictions(const Matrix& predictions, const std::vector<int>& labels,
                                int class_count);
Evaluation evaluate(const ModelParameters<double>& model, const LabeledDataset& data);

struct EpochMetrics {
  int epoch = 0;  // 0 = before adaptation
  double alpha = 1;
  double mean_loss = 0;
  Evaluation eval;
};

struct MetricsRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  PretrainReport pretrain;
  Evaluation source_only;
  std::vector<EpochMetrics> epochs;  // epoch 0 first
  Evaluation final;
};

struct Domains {
  LabeledDataset source;
  LabeledDataset target;
};

Domains make_domains(const ExperimentConfig& config, std::uint64_t run_seed);

/// Source model for one run: loaded from config.checkpoint or pre-trained.
ModelParameters<double> source_model(const ExperimentConfig& config, const Domains& domains,
                                     std::uint64_t run_seed, PretrainReport* report = nullptr);

/// One seed of the full pipeline with config.seed as the run seed.
MetricsRecord run_adaptation(const ExperimentConfig& config,
                             ModelParameters<double>* source_out = nullptr,
                             ModelParameters<double>* adapted_out = nullptr);
/// run_adaptation for each configured seed.
std::vector<MetricsRecord> run_seeds(const ExperimentConfig& config);

struct AblationRow {
  std::string name;
  ExperimentConfig config;
  std::vector<MetricsRecord> runs;
};

/// Full method plus one row per disabled component.
std::vector<AblationRow> run_ablation_suite(const ExperimentConfig& config);

enum class SweepParameter { K, DecayBase, BankMomentum };

struct SweepPoint {
  double value = 0;
  ExperimentConfig config;
  std::vector<MetricsRecord> runs;
  double mean_accuracy() const;
};

std::vector<SweepPoint> run_sweep(const ExperimentConfig& config, SweepParameter parameter,
                                  const std::vector<double>& values);

// Reports.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& runs);
void write_final_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& runs);
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);
void write_sweep_csv(const std::filesystem::path& path, SweepParameter parameter,
                     const std::vector<SweepPoint>& points);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal line chart with axes, grid lines and one polyline per series.
std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series);

std::string to_string(SweepParameter p);
double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

}  // namespace nsca

#endif  // NSCA_EXPERIMENT_HPP
