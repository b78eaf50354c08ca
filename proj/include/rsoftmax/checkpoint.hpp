#pragma once

// JSON model checkpoints:
//
//   {
//     "format": "rsoftmax-checkpoint",
//     "version": 1,
//     "spec": { "input_dim", "hidden_dim", "n_classes", "method", "rate_grad",
//               "count_weight", "initial_temperature" },
//     "seed": <init seed>,
//     "blobs": [ { "name": "layer1.weight", "size": N, "data": [ ... ] }, ... ]
//   }
//
// Blobs appear in MultiLabelModel::parameters() order. Doubles are written
// with round-trip precision.

#include <fstream>
#include <string>

#include "json.hpp"
#include "rsoftmax/error.hpp"
#include "rsoftmax/nn.hpp"

namespace rsoftmax {

inline constexpr int kCheckpointVersion = 1;

inline RGradMode parse_rate_grad(std::string_view s) {
  if (s == "full") return RGradMode::Full;
  if (s == "detached") return RGradMode::Detached;
  throw ConfigError("rate_grad must be 'full' or 'detached', got '" + std::string(s) + "'");
}

inline nlohmann::json checkpoint_json(const MultiLabelModel& model, std::uint64_t seed) {
  const auto& s = model.spec();
  nlohmann::json j;
  j["format"] = "rsoftmax-checkpoint";
  j["version"] = kCheckpointVersion;
  j["spec"] = {{"input_dim", s.input_dim},
               {"hidden_dim", s.hidden_dim},
               {"n_classes", s.n_classes},
               {"method", std::string(to_string(s.method))},
               {"rate_grad", std::string(to_string(s.rate_grad))},
               {"count_weight", s.count_weight},
               {"initial_temperature", s.initial_temperature}};
  j["seed"] = seed;
  auto names = model.blob_names();
  auto blobs = model.blobs();
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    arr.push_back({{"name", names[b]},
                   {"size", blobs[b].size()},
                   {"data", std::vector<double>(blobs[b].begin(), blobs[b].end())}});
  }
  j["blobs"] = std::move(arr);
  return j;
}

inline MultiLabelModel model_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format") != "rsoftmax-checkpoint") throw CorruptFileError("not a checkpoint file");
    if (j.at("version") != kCheckpointVersion) {
      throw CorruptFileError("unsupported checkpoint version " + j.at("version").dump());
    }
    const auto& js = j.at("spec");
    ModelSpec spec;
    spec.input_dim = js.at("input_dim").get<std::size_t>();
    spec.hidden_dim = js.at("hidden_dim").get<std::size_t>();
    spec.n_classes = js.at("n_classes").get<std::size_t>();
    spec.method = parse_method(js.at("method").get<std::string>());
    spec.rate_grad = parse_rate_grad(js.at("rate_grad").get<std::string>());
    spec.count_weight = js.at("count_weight").get<double>();
    spec.initial_temperature = js.at("initial_temperature").get<double>();
    MultiLabelModel model(spec, j.at("seed").get<std::uint64_t>());
    const auto names = model.blob_names();
    const auto& blobs = j.at("blobs");
    if (blobs.size() != names.size()) throw CorruptFileError("checkpoint blob count does not match spec");
    auto params = model.parameters();
    for (std::size_t b = 0; b < names.size(); ++b) {
      if (blobs[b].at("name") != names[b]) throw CorruptFileError("checkpoint blob order mismatch at " + names[b]);
      const auto data = blobs[b].at("data").get<std::vector<double>>();
      if (data.size() != params[b].size() || blobs[b].at("size").get<std::size_t>() != data.size()) {
        throw CorruptFileError("checkpoint blob " + names[b] + " has the wrong size");
      }
      std::copy(data.begin(), data.end(), params[b].begin());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const MultiLabelModel& model, std::uint64_t seed, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << checkpoint_json(model, seed).dump() << '\n';
}

inline MultiLabelModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("malformed checkpoint: ") + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace rsoftmax
