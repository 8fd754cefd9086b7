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

// Optimizers and the masked-language-model training loop under a fixed set
// of per-head masks. All per-step randomness is derived from (seed, step),
// so a checkpoint holds weights, optimizer moments and the step count only.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sparsemask/checkpoint.hpp"
#include "sparsemask/corpus.hpp"
#include "sparsemask/model.hpp"

namespace sparsemask {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.1;
  double momentum = 0.0;  // sgd only
  double beta1 = 0.9;     // adam only
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const OptimizerConfig& config, std::size_t size);

  /// x ← x − update(g); `lr_scale` multiplies the configured rate.
  void step(std::span<double> x, std::span<const double> g, double lr_scale = 1.0);

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }

  /// Writes "<prefix>.m", "<prefix>.v" and the step counter into `ckpt`.
  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  TransformerConfig model;
  CorpusConfig corpus;
  std::size_t steps = 600;
  std::size_t batch_size = 16;
  double mask_fraction = 0.15;
  OptimizerConfig optimizer{OptimizerKind::adam, 3e-3};
  double init_scale = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-step random stream identifiers shared by every training loop.
enum TrainStream : std::uint64_t {
  kInitStream = 11,
  kBatchStream = 12,
  kNoiseStream = 13,
  kEvalStream = 14,
  kMaskStream = 15,
};

/// The batch a training loop consumes at `step`.
MlmBatch training_batch(const TrainConfig& config, const Corpus& corpus, std::uint64_t step);

/// Held-out MLM loss with positions fixed by the run seed.
double heldout_loss(const TrainConfig& config, const Corpus& corpus, const ModelParams& params,
                    const HeadMasks& masks);

/// Trains every weight with the masks held fixed.
class WeightTrainer {
 public:
  WeightTrainer(const TrainConfig& config, const Corpus& corpus, HeadMasks masks);
  /// Continues from `params` instead of a fresh initialization.
  WeightTrainer(const TrainConfig& config, const Corpus& corpus, HeadMasks masks,
                ModelParams params);

  /// One update; returns the batch loss before the update.
  double step();
  std::uint64_t steps_done() const { return step_; }

  const ModelParams& params() const { return params_; }
  const HeadMasks& masks() const { return masks_; }
  double evaluate() const;

  Checkpoint checkpoint() const;
  /// Restores weights, optimizer moments and the step counter.
  void restore(const Checkpoint& ckpt);

 private:
  TrainConfig config_;
  const Corpus* corpus_;
  HeadMasks masks_;
  ModelParams params_;
  Optimizer optimizer_;
  std::uint64_t step_ = 0;
};

}  // namespace sparsemask
