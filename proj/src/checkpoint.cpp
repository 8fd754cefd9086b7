// Copyright 2026 The sparsemask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparsemask/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace sparsemask {

namespace {

constexpr const char* kFormat = "sparsemask-checkpoint-v1";

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["config"] = ckpt.params.config;
  nlohmann::json params = nlohmann::json::object();
  ckpt.params.for_each([&](const std::string& name, const Matrix& m) {
    params[name] = {{"rows", m.rows()},
                    {"cols", m.cols()},
                    {"data", std::vector<double>(m.values().begin(), m.values().end())}};
  });
  doc["params"] = std::move(params);
  doc["arrays"] = ckpt.arrays;
  doc["counters"] = ckpt.counters;
  doc["labels"] = ckpt.labels;
  return doc.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", std::string()) != kFormat)
      throw CheckpointError(std::string("checkpoint format tag missing or not '") + kFormat + "'");
    Checkpoint ckpt;
    const auto config = doc.at("config").get<TransformerConfig>();
    ckpt.params = ModelParams::zeros(config);
    const auto& params = doc.at("params");
    ckpt.params.for_each([&](const std::string& name, Matrix& m) {
      if (!params.contains(name)) throw CheckpointError("checkpoint lacks parameter '" + name + "'");
      const auto& p = params.at(name);
      const auto data = p.at("data").get<std::vector<double>>();
      if (p.at("rows").get<std::size_t>() != m.rows() ||
          p.at("cols").get<std::size_t>() != m.cols() || data.size() != m.size())
        throw CheckpointError("parameter '" + name + "' has the wrong shape for the stored config");
      std::copy(data.begin(), data.end(), m.values().begin());
    });
    ckpt.arrays = doc.value("arrays", decltype(ckpt.arrays){});
    ckpt.counters = doc.value("counters", decltype(ckpt.counters){});
    ckpt.labels = doc.value("labels", decltype(ckpt.labels){});
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config rejected: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw CheckpointError("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace sparsemask
