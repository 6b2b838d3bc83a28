#include "nsca/experiment.hpp"

#include "nsca/checkpoint.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <thread>

namespace nsca {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Distinct generator streams per run seed.
std::uint64_t stream(std::uint64_t run_seed, std::uint64_t salt) {
  return run_seed * 1000003ULL + salt;
}

std::vector<MetricsRecord> run_all(const std::vector<ExperimentConfig>& configs) {
  // Each run owns its model, bank and generators; results land in input order.
  std::vector<std::optional<MetricsRecord>> slots(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
      try {
        slots[i] = run_adaptation(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(configs.size(), std::max(1U, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::vector<MetricsRecord> out;
  out.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

std::vector<ExperimentConfig> per_seed(const ExperimentConfig& config) {
  std::vector<ExperimentConfig> out;
  for (int s = 0; s < config.seeds; ++s) {
    ExperimentConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(s);
    c.seeds = 1;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::K: return "k";
    case SweepParameter::DecayBase: return "decay_base";
    case SweepParameter::BankMomentum: return "bank_momentum";
  }
  return "?";
}

Evaluation evaluate_predictions(const Matrix& predictions, const std::vector<int>& labels,
                                int class_count) {
  if (predictions.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("evaluate: prediction and label counts differ");
  std::vector<long> hits(static_cast<std::size_t>(class_count), 0);
  std::vector<long> totals(static_cast<std::size_t>(class_count), 0);
  long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto label = static_cast<std::size_t>(labels[i]);
    ++totals[label];
    if (argmax(predictions.row(static_cast<Eigen::Index>(i))) == labels[i]) {
      ++hits[label];
      ++correct;
    }
  }
  Evaluation e;
  e.overall = labels.empty() ? 0 : 100.0 * static_cast<double>(correct) /
                                       static_cast<double>(labels.size());
  std::vector<double> present;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const double acc =
        totals[k] > 0 ? 100.0 * static_cast<double>(hits[k]) / static_cast<double>(totals[k]) : 0;
    e.per_class.push_back(acc);
    if (totals[k] > 0) present.push_back(acc);
  }
  e.class_average = mean(present);
  return e;
}

Evaluation evaluate(const ModelParameters<double>& model, const LabeledDataset& data) {
  const auto out = forward(model, data.inputs);
  return evaluate_predictions(out.predictions, data.labels, data.class_count);
}

Domains make_domains(const ExperimentConfig& config, std::uint64_t run_seed) {
  const auto& d = config.dataset;
  Domains out;
  if (!d.synthetic()) {
    out.source = load_csv(d.source_csv, d.label_column);
    out.target = load_csv(d.target_csv, d.label_column);
    if (out.source.label_names != out.target.label_names) {
      // Re-index target labels into the source label space.
      std::vector<int> remap;
      for (const auto& name : out.target.label_names) {
        auto it = std::find(out.source.label_names.begin(), out.source.label_names.end(), name);
        if (it == out.source.label_names.end())
          throw DataError("target label '" + name + "' does not occur in the source data");
        remap.push_back(static_cast<int>(it - out.source.label_names.begin()));
      }
      for (int& l : out.target.labels) l = remap[static_cast<std::size_t>(l)];
      out.target.class_count = out.source.class_count;
      out.target.label_names = out.source.label_names;
    }
    if (out.source.dim() != out.target.dim())
      throw DataError("source and target CSV files have different feature counts");
    return out;
  }
  out.source = make_gaussian_mixture(d.classes, d.per_class_source, d.dim, d.separation,
                                     stream(run_seed, 1));
  const auto clean_target = make_gaussian_mixture(d.classes, d.per_class_target, d.dim,
                                                  d.separation, stream(run_seed, 2));
  ShiftSpec shift;
  shift.rotation_angle = d.rotation_deg * kPi / 180.0;
  shift.feature_noise_std = d.noise;
  shift.class_imbalance_ratios = d.target_imbalance;
  shift.seed = stream(run_seed, 3);
  out.target = apply_shift(clean_target, shift);
  return out;
}

ModelParameters<double> source_model(const ExperimentConfig& config, const Domains& domains,
                                     std::uint64_t run_seed, PretrainReport* report) {
  if (!config.checkpoint.empty()) {
    auto ckpt = load_checkpoint(config.checkpoint);
    if (ckpt.params.input_dim() != domains.target.dim() ||
        ckpt.params.class_count() != domains.source.class_count)
      throw ConfigError("checkpoint shape does not match the dataset");
    return std::move(ckpt.params);
  }
  Architecture arch;
  arch.input_dim = domains.source.dim();
  arch.hidden = config.hidden;
  arch.class_count = domains.source.class_count;
  auto params = init_parameters<double>(arch, stream(run_seed, 4));
  auto [train, val] = stratified_split(domains.source, 0.1, stream(run_seed, 5));
  auto state = OptimizerState<double>::for_model(params, config.source_learning_rate,
                                                 config.momentum);
  PretrainOptions opts;
  opts.epochs = config.epochs_source;
  opts.batch_size = config.batch_size;
  opts.seed = stream(run_seed, 6);
  const auto r = source_pretrain(params, train, &val, state, opts);
  if (report) *report = r;
  return params;
}

MetricsRecord run_adaptation(const ExperimentConfig& config,
                             ModelParameters<double>* source_out,
                             ModelParameters<double>* adapted_out) {
  config.validate();
  MetricsRecord rec;
  rec.config_hash = config_hash(config);
  rec.seed = config.seed;

  const Domains domains = make_domains(config, config.seed);
  auto model = source_model(config, domains, config.seed, &rec.pretrain);
  if (model.input_dim() != domains.target.dim())
    throw ConfigError("model input dim does not match the target data");

  if (source_out) *source_out = model;
  rec.source_only = evaluate(model, domains.target);
  rec.epochs.push_back({0, 1.0, 0.0, rec.source_only});

  auto options = config.adapt_options(stream(config.seed, 7));
  if (config.diagnostics) {
    std::filesystem::create_directories(config.out_dir);
    options.pair_dump = std::filesystem::path(config.out_dir) /
                        ("pairs_seed" + std::to_string(config.seed) + ".csv");
  }
  // Only the inputs reach the adaptation loop; labels are used by the epoch callback alone.
  const auto bank = adapt(model, UnlabeledView(domains.target.inputs), options,
                          [&](const EpochSummary& s, const ModelParameters<double>& m) {
                            rec.epochs.push_back({s.epoch, s.alpha, s.mean_loss,
                                                  evaluate(m, domains.target)});
                          });
  if (config.diagnostics)
    bank.write_snapshot_csv(std::filesystem::path(config.out_dir) /
                            ("bank_seed" + std::to_string(config.seed) + ".csv"));
  rec.final = rec.epochs.back().eval;
  if (adapted_out) *adapted_out = std::move(model);
  return rec;
}

std::vector<MetricsRecord> run_seeds(const ExperimentConfig& config) {
  config.validate();
  return run_all(per_seed(config));
}

std::vector<AblationRow> run_ablation_suite(const ExperimentConfig& config) {
  config.validate();
  std::vector<AblationRow> rows;
  auto add = [&](std::string name, auto mutate) {
    AblationRow row;
    row.name = std::move(name);
    row.config = config;
    row.config.ablation = {};
    mutate(row.config.ablation);
    rows.push_back(std::move(row));
  };
  add("full", [](AblationSwitches&) {});
  add("no_intra_class_diversity", [](AblationSwitches& a) { a.disable_m2 = true; });
  add("no_inertia", [](AblationSwitches& a) { a.disable_inertia = true; });
  add("no_class_scaling", [](AblationSwitches& a) { a.disable_class_scaling = true; });
  add("no_adaptive_encoding", [](AblationSwitches& a) { a.disable_adaptive_encoding = true; });

  std::vector<ExperimentConfig> all;
  for (const auto& r : rows) {
    auto seeds = per_seed(r.config);
    all.insert(all.end(), seeds.begin(), seeds.end());
  }
  auto results = run_all(all);
  std::size_t at = 0;
  for (auto& r : rows)
    for (int s = 0; s < config.seeds; ++s) r.runs.push_back(std::move(results[at++]));
  return rows;
}

double SweepPoint::mean_accuracy() const {
  std::vector<double> acc;
  for (const auto& r : runs) acc.push_back(r.final.overall);
  return mean(acc);
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& config, SweepParameter parameter,
                                  const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<SweepPoint> points;
  for (double v : values) {
    SweepPoint p;
    p.value = v;
    p.config = config;
    if (parameter == SweepParameter::K) {
      if (v != std::floor(v)) throw ConfigError("sweep: K values must be integers");
      p.config.neighbors = static_cast<int>(v);
    } else if (parameter == SweepParameter::DecayBase) {
      p.config.decay_base = v;
    } else {
      p.config.bank_momentum = v;
    }
    p.config.validate();
    points.push_back(std::move(p));
  }
  std::vector<ExperimentConfig> all;
  for (const auto& p : points) {
    auto seeds = per_seed(p.config);
    all.insert(all.end(), seeds.begin(), seeds.end());
  }
  auto results = run_all(all);
  std::size_t at = 0;
  for (auto& p : points)
    for (int s = 0; s < config.seeds; ++s) p.runs.push_back(std::move(results[at++]));
  return points;
}

}  // namespace nsca
