// nsca: source-free adaptation driver.
//
//   nsca pretrain  train source models and write checkpoints
//   nsca adapt     pre-train (or load), adapt, write metrics.csv / final.csv / checkpoints
//   nsca ablate    full method plus one run per disabled component -> ablation.csv
//   nsca sweep     vary K, the decay base or the bank momentum -> sweep.csv + sweep.svg
//   nsca eval      evaluate a checkpoint on the target domain
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include "nsca/checkpoint.hpp"
#include "nsca/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using nlohmann::json;
using namespace nsca;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

/// Options shared by every subcommand. Values given on the command line are collected as JSON
/// and overlaid on the --config document.
struct CommonOptions {
  std::string config_path;
  json overrides = json::object();

  template <typename T>
  CLI::Option* bind(CLI::App* app, const std::string& flag, const std::string& key,
                    const std::string& help) {
    return app->add_option_function<T>(flag, [this, key](const T& v) { overrides[key] = v; },
                                       help);
  }
  void bind_flag(CLI::App* app, const std::string& flag, const std::string& key,
                 const std::string& help) {
    app->add_flag_function(flag, [this, key](std::int64_t n) { overrides[key] = n > 0; }, help);
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config document (flags override it)");
    bind<std::string>(app, "--out", "out", "output directory");
    bind<std::uint64_t>(app, "--seed", "seed", "first run seed");
    bind<int>(app, "--seeds", "seeds", "number of consecutive seeds");
    bind<int>(app, "--k", "k", "neighbors per sample");
    bind<double>(app, "--decay-base", "decay_base", "base of the alpha schedule");
    bind<double>(app, "--bank-momentum", "bank_momentum", "memory bank blend factor, 0 = replace");
    bind<double>(app, "--lr", "learning_rate", "adaptation learning rate");
    bind<double>(app, "--source-lr", "source_learning_rate", "source pre-training learning rate");
    bind<double>(app, "--momentum", "momentum", "SGD momentum");
    bind<int>(app, "--batch-size", "batch_size", "minibatch size");
    bind<int>(app, "--epochs-source", "epochs_source", "source pre-training epochs");
    bind<int>(app, "--epochs-adapt", "epochs_adapt", "adaptation epochs");
    bind<std::vector<Eigen::Index>>(app, "--hidden", "hidden", "extractor widths, e.g. 64,32")
        ->delimiter(',');
    bind<int>(app, "--classes", "classes", "synthetic: class count");
    bind<int>(app, "--dim", "dim", "synthetic: input dimension");
    bind<int>(app, "--per-class-source", "per_class_source", "synthetic: source samples per class");
    bind<int>(app, "--per-class-target", "per_class_target", "synthetic: target samples per class");
    bind<double>(app, "--separation", "separation", "synthetic: cluster mean scale");
    bind<double>(app, "--rotation-deg", "rotation_deg", "synthetic: target rotation (degrees)");
    bind<double>(app, "--noise", "noise", "synthetic: target feature noise std");
    bind<std::vector<double>>(app, "--target-imbalance", "target_imbalance",
                              "synthetic: per-class target size ratios")
        ->delimiter(',');
    bind<std::string>(app, "--source-csv", "source_csv", "labeled source CSV");
    bind<std::string>(app, "--target-csv", "target_csv", "target CSV (labels used for evaluation only)");
    bind<std::string>(app, "--label-column", "label_column", "label column name in CSV inputs");
    bind<std::string>(app, "--checkpoint", "checkpoint", "source model checkpoint to start from");
    bind_flag(app, "--raw-sum", "raw_sum", "use the unnormalized pair sum");
    bind_flag(app, "--disable-m2", "disable_m2", "ablate the intra-class diversity term");
    bind_flag(app, "--disable-inertia", "disable_inertia", "ablate confidence inertia");
    bind_flag(app, "--disable-class-scaling", "disable_class_scaling", "ablate class-imbalance scaling");
    bind_flag(app, "--disable-adaptive-encoding", "disable_adaptive_encoding",
              "always use the neighborhood signature as class encoding");
    bind_flag(app, "--diagnostics", "diagnostics", "dump pair factors and bank snapshots");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    c = config_from_json(overrides, c);
    c.validate();
    return c;
  }
};

std::filesystem::path out_path(const ExperimentConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  return std::filesystem::path(c.out_dir) / name;
}

void save_config(const ExperimentConfig& c) {
  std::ofstream(out_path(c, "config.json")) << to_json(c).dump(2) << '\n';
}

void print_summary(const std::vector<MetricsRecord>& runs) {
  std::vector<double> base, adapted;
  std::cout << std::fixed << std::setprecision(2);
  for (const auto& r : runs) {
    std::cout << "seed " << r.seed << ": source-only " << r.source_only.overall << "%  adapted "
              << r.final.overall << "%  (class avg " << r.source_only.class_average << " -> "
              << r.final.class_average << ")\n";
    base.push_back(r.source_only.overall);
    adapted.push_back(r.final.overall);
  }
  std::cout << "mean: source-only " << mean(base) << " +- " << stddev(base) << "  adapted "
            << mean(adapted) << " +- " << stddev(adapted) << '\n';
}

int cmd_pretrain(const ExperimentConfig& config) {
  save_config(config);
  for (int s = 0; s < config.seeds; ++s) {
    ExperimentConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(s);
    c.seeds = 1;
    const auto domains = make_domains(c, c.seed);
    PretrainReport report;
    const auto model = source_model(c, domains, c.seed, &report);
    const auto target = evaluate(model, domains.target);
    const auto path = out_path(c, "source_seed" + std::to_string(c.seed) + ".json");
    save_checkpoint(path, model, config_hash(c));
    std::cout << std::fixed << std::setprecision(2) << "seed " << c.seed << ": source train "
              << report.train_accuracy << "%  validation " << report.validation_accuracy
              << "%  target (source-only) " << target.overall << "%  -> " << path.string()
              << '\n';
  }
  return 0;
}

int cmd_adapt(const ExperimentConfig& config) {
  save_config(config);
  std::vector<MetricsRecord> runs;
  for (int s = 0; s < config.seeds; ++s) {
    ExperimentConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(s);
    c.seeds = 1;
    ModelParameters<double> source, adapted;
    runs.push_back(run_adaptation(c, &source, &adapted));
    const std::string tag = "seed" + std::to_string(c.seed) + ".json";
    if (config.checkpoint.empty()) save_checkpoint(out_path(c, "source_" + tag), source, config_hash(c));
    save_checkpoint(out_path(c, "adapted_" + tag), adapted, config_hash(c));
  }
  write_metrics_csv(out_path(config, "metrics.csv"), runs);
  write_final_csv(out_path(config, "final.csv"), runs);
  print_summary(runs);
  return 0;
}

int cmd_ablate(const ExperimentConfig& config) {
  save_config(config);
  const auto rows = run_ablation_suite(config);
  write_ablation_csv(out_path(config, "ablation.csv"), rows);
  std::cout << std::fixed << std::setprecision(2);
  for (const auto& row : rows) {
    std::vector<double> acc;
    for (const auto& r : row.runs) acc.push_back(r.final.overall);
    std::cout << std::left << std::setw(28) << row.name << mean(acc) << " +- " << stddev(acc)
              << '\n';
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const std::string& param,
              std::vector<double> values) {
  SweepParameter p;
  if (param == "k" || param == "K")
    p = SweepParameter::K;
  else if (param == "decay_base" || param == "decay-base")
    p = SweepParameter::DecayBase;
  else if (param == "bank_momentum" || param == "bank-momentum")
    p = SweepParameter::BankMomentum;
  else
    throw ConfigError("sweep: --param must be k, decay_base or bank_momentum");
  if (values.empty()) {
    if (p == SweepParameter::K)
      values = {2, 3, 4, 5, 6, 7};
    else if (p == SweepParameter::DecayBase)
      values = {0.125, 0.25, 0.5, 0.75};
    else
      values = {0, 0.5, 0.9};
  }
  save_config(config);
  const auto points = run_sweep(config, p, values);
  write_sweep_csv(out_path(config, "sweep.csv"), p, points);
  SvgSeries series{"mean accuracy", {}, {}};
  for (const auto& pt : points) {
    series.x.push_back(pt.value);
    series.y.push_back(pt.mean_accuracy());
  }
  const std::string x_label = p == SweepParameter::K           ? "Number of nearest neighbors (K)"
                              : p == SweepParameter::DecayBase ? "Decay base"
                                                               : "Bank momentum";
  std::ofstream(out_path(config, "sweep.svg"))
      << render_line_chart_svg("Target accuracy vs " + x_label, x_label, "Accuracy (%)", {series});
  std::cout << std::fixed << std::setprecision(2);
  for (const auto& pt : points)
    std::cout << to_string(p) << '=' << pt.value << ": " << pt.mean_accuracy() << "%\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& config) {
  if (config.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
  const auto ckpt = load_checkpoint(config.checkpoint);
  const auto domains = make_domains(config, config.seed);
  const auto e = evaluate(ckpt.params, domains.target);
  std::cout << std::fixed << std::setprecision(2) << "overall " << e.overall << "%  class avg "
            << e.class_average << "%\n";
  for (std::size_t k = 0; k < e.per_class.size(); ++k)
    std::cout << "  class " << k << ": " << e.per_class[k] << "%\n";
  MetricsRecord rec;
  rec.config_hash = ckpt.config_hash;
  rec.seed = config.seed;
  rec.source_only = e;
  rec.final = e;
  write_final_csv(out_path(config, "eval.csv"), {rec});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-free domain adaptation with neighborhood signatures"};
  app.require_subcommand(1);

  CommonOptions pretrain_opts, adapt_opts, ablate_opts, sweep_opts, eval_opts;
  auto* pretrain = app.add_subcommand("pretrain", "train source models");
  pretrain_opts.attach(pretrain);
  auto* adapt_cmd = app.add_subcommand("adapt", "adapt source models to the target domain");
  adapt_opts.attach(adapt_cmd);
  auto* ablate = app.add_subcommand("ablate", "ablation suite");
  ablate_opts.attach(ablate);
  auto* sweep = app.add_subcommand("sweep", "sweep K, the decay base or the bank momentum");
  sweep_opts.attach(sweep);
  std::string sweep_param = "k";
  std::vector<double> sweep_values;
  sweep->add_option("--param", sweep_param, "k, decay_base or bank_momentum");
  sweep->add_option("--values", sweep_values, "values to sweep")->delimiter(',');
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the target domain");
  eval_opts.attach(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(pretrain_opts.resolve());
    if (adapt_cmd->parsed()) return cmd_adapt(adapt_opts.resolve());
    if (ablate->parsed()) return cmd_ablate(ablate_opts.resolve());
    if (sweep->parsed()) return cmd_sweep(sweep_opts.resolve(), sweep_param, sweep_values);
    if (eval->parsed()) return cmd_eval(eval_opts.resolve());
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
