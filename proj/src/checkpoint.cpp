#include "nsca/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace nsca {

namespace {

using json = nlohmann::json;

json layer_to_json(const DenseLayer<double>& l, const char* role) {
  return {{"role", role},
          {"fan_in", l.fan_in()},
          {"fan_out", l.fan_out()},
          {"weight", std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size())},
          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

DenseLayer<double> layer_from_json(const json& j) {
  const auto in = j.at("fan_in").get<Eigen::Index>();
  const auto out = j.at("fan_out").get<Eigen::Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
    throw ShapeError("checkpoint: layer array sizes do not match declared shape");
  DenseLayer<double> l{Matrix(in, out), Vector(out)};
  std::copy(w.begin(), w.end(), l.weight.data());
  std::copy(b.begin(), b.end(), l.bias.data());
  return l;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParameters<double>& params,
                     const std::string& config_hash) {
  json doc;
  doc["format"] = "nsca-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["config_hash"] = config_hash;
  json layers = json::array();
  for (const auto& l : params.extractor) layers.push_back(layer_to_json(l, "extractor"));
  layers.push_back(layer_to_json(params.classifier, "classifier"));
  doc["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out << doc.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("load_checkpoint: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError("load_checkpoint: " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "nsca-checkpoint")
    throw CheckpointError("load_checkpoint: " + path.string() + " is not a model checkpoint");
  if (doc.value("version", 0) != kCheckpointVersion)
    throw CheckpointError("load_checkpoint: unsupported checkpoint version");
  Checkpoint c;
  try {
    c.config_hash = doc.value("config_hash", "");
    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.empty() || layers.back().at("role") != "classifier")
      throw CheckpointError("load_checkpoint: last layer must be the classifier");
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
      c.params.extractor.push_back(layer_from_json(layers[i]));
    c.params.classifier = layer_from_json(layers.back());
    c.params.validate();
  } catch (const json::exception& e) {
    throw CheckpointError("load_checkpoint: " + path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw CheckpointError("load_checkpoint: " + path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace nsca
