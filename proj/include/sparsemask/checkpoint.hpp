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

// JSON checkpoints: the transformer config, one flat float array per named
// weight tensor, and any extra named arrays and counters a training loop
// needs to resume. Doubles are written with 17 significant digits, so a
// save/load round trip is bit-exact.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sparsemask/model.hpp"

namespace sparsemask {

struct Checkpoint {
  ModelParams params;
  std::map<std::string, std::vector<double>> arrays;
  std::map<std::string, std::uint64_t> counters;
  std::map<std::string, std::string> labels;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparsemask
