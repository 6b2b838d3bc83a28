#include "nsca/experiment.hpp"

#include <cstdio>
#include <fstream>

namespace nsca {

using nlohmann::json;

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (neighbors < 1) fail("k must be >= 1");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (!(decay_base > 0 && decay_base < 1)) fail("decay_base must lie in (0, 1)");
  if (!(bank_momentum >= 0 && bank_momentum < 1)) fail("bank_momentum must lie in [0, 1)");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
  if (!(learning_rate > 0) || !(source_learning_rate > 0)) fail("learning rates must be > 0");
  if (epochs_source < 0 || epochs_adapt < 0) fail("epoch counts must be >= 0");
  if (seeds < 1) fail("seeds must be >= 1");
  if (hidden.empty()) fail("hidden must list at least one extractor width");
  for (auto h : hidden)
    if (h < 1) fail("hidden widths must be >= 1");
  if (dataset.synthetic()) {
    if (dataset.classes < 2) fail("classes must be >= 2");
    if (dataset.dim < 2) fail("dim must be >= 2");
    if (dataset.per_class_source < 1 || dataset.per_class_target < 1)
      fail("per-class counts must be >= 1");
    if (!(dataset.separation > 0)) fail("separation must be > 0");
    if (!(dataset.noise >= 0)) fail("noise must be >= 0");
    if (!dataset.target_imbalance.empty() &&
        static_cast<int>(dataset.target_imbalance.size()) != dataset.classes)
      fail("target_imbalance needs one ratio per class");
    for (double r : dataset.target_imbalance)
      if (!(r > 0)) fail("target_imbalance ratios must be > 0");
  }
}

AdaptOptions ExperimentConfig::adapt_options(std::uint64_t run_seed) const {
  AdaptOptions o;
  o.neighbors = neighbors;
  o.decay_base = decay_base;
  o.bank_momentum = bank_momentum;
  o.learning_rate = learning_rate;
  o.momentum = momentum;
  o.batch_size = batch_size;
  o.epochs = epochs_adapt;
  o.seed = run_seed;
  o.mask.intra_class_diversity = !ablation.disable_m2;
  o.mask.inertia = !ablation.disable_inertia;
  o.mask.class_scaling = !ablation.disable_class_scaling;
  o.mask.raw_sum = raw_sum;
  o.adaptive_encoding = !ablation.disable_adaptive_encoding;
  return o;
}

json to_json(const ExperimentConfig& c) {
  return {
      {"source_csv", c.dataset.source_csv},
      {"target_csv", c.dataset.target_csv},
      {"label_column", c.dataset.label_column},
      {"classes", c.dataset.classes},
      {"dim", c.dataset.dim},
      {"per_class_source", c.dataset.per_class_source},
      {"per_class_target", c.dataset.per_class_target},
      {"separation", c.dataset.separation},
      {"rotation_deg", c.dataset.rotation_deg},
      {"noise", c.dataset.noise},
      {"target_imbalance", c.dataset.target_imbalance},
      {"hidden", c.hidden},
      {"k", c.neighbors},
      {"decay_base", c.decay_base},
      {"bank_momentum", c.bank_momentum},
      {"learning_rate", c.learning_rate},
      {"source_learning_rate", c.source_learning_rate},
      {"momentum", c.momentum},
      {"batch_size", c.batch_size},
      {"epochs_source", c.epochs_source},
      {"epochs_adapt", c.epochs_adapt},
      {"seed", c.seed},
      {"seeds", c.seeds},
      {"disable_m2", c.ablation.disable_m2},
      {"disable_inertia", c.ablation.disable_inertia},
      {"disable_class_scaling", c.ablation.disable_class_scaling},
      {"disable_adaptive_encoding", c.ablation.disable_adaptive_encoding},
      {"raw_sum", c.raw_sum},
      {"checkpoint", c.checkpoint},
      {"out", c.out_dir},
      {"diagnostics", c.diagnostics},
  };
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("config: document must be a JSON object");
  const json known = to_json(c);
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  };
  get("source_csv", c.dataset.source_csv);
  get("target_csv", c.dataset.target_csv);
  get("label_column", c.dataset.label_column);
  get("classes", c.dataset.classes);
  get("dim", c.dataset.dim);
  get("per_class_source", c.dataset.per_class_source);
  get("per_class_target", c.dataset.per_class_target);
  get("separation", c.dataset.separation);
  get("rotation_deg", c.dataset.rotation_deg);
  get("noise", c.dataset.noise);
  get("target_imbalance", c.dataset.target_imbalance);
  get("hidden", c.hidden);
  get("k", c.neighbors);
  get("decay_base", c.decay_base);
  get("bank_momentum", c.bank_momentum);
  get("learning_rate", c.learning_rate);
  get("source_learning_rate", c.source_learning_rate);
  get("momentum", c.momentum);
  get("batch_size", c.batch_size);
  get("epochs_source", c.epochs_source);
  get("epochs_adapt", c.epochs_adapt);
  get("seed", c.seed);
  get("seeds", c.seeds);
  get("disable_m2", c.ablation.disable_m2);
  get("disable_inertia", c.ablation.disable_inertia);
  get("disable_class_scaling", c.ablation.disable_class_scaling);
  get("disable_adaptive_encoding", c.ablation.disable_adaptive_encoding);
  get("raw_sum", c.raw_sum);
  get("checkpoint", c.checkpoint);
  get("out", c.out_dir);
  get("diagnostics", c.diagnostics);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("out");
  j.erase("diagnostics");
  const std::string canonical = j.dump();  // object keys are sorted
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nsca
