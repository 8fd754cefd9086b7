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

// One training run under a chosen mask source, recorded as a TrainRun.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sparsemask/corpus.hpp"
#include "sparsemask/dam.hpp"
#include "sparsemask/masks.hpp"
#include "sparsemask/model.hpp"
#include "sparsemask/trainer.hpp"

namespace sparsemask {

enum class MaskSource {
  full,
  no_diag,      // every head drops its diagonal
  random_drop,  // every head drops `drop_count` uniformly chosen cells
  fixed,        // masks supplied by the caller
  dam,          // masks learned jointly with the weights
  two_stage,    // learn P, prune the smallest cells, fine-tune
};

std::string_view to_string(MaskSource source);
MaskSource parse_mask_source(std::string_view name);

struct RunConfig {
  TrainConfig train;
  MaskSource source = MaskSource::full;
  /// random_drop: cells dropped per head; 0 drops n, the no-diag count.
  std::size_t drop_count = 0;
  /// fixed: one mask per head, or a single mask shared by all heads.
  std::vector<AttentionMask> fixed_masks;
  /// dam, and the first stage of two_stage.
  DamConfig dam;
  /// two_stage: fraction of cells pruned per head from P.
  double prune_fraction = 0.8;
  /// two_stage: steps under the pruned mask after `train.steps` of stage one.
  std::size_t finetune_steps = 400;

  void validate() const;
};

struct MetricRow {
  std::uint64_t step = 0;
  std::string phase;  // "train", "dam", "finetune"
  double mlm_loss = 0.0;
  double l1_term = 0.0;
  double total_loss = 0.0;
  double sparsity = 0.0;  // mean over heads of the mask in force
};

/// Config is fixed at construction; metrics only grow.
class TrainRun {
 public:
  TrainRun(std::string config_json, std::uint64_t seed);

  const std::string& config_json() const { return config_json_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<MetricRow>& metrics() const { return metrics_; }
  void append(MetricRow row);

  double heldout_loss = 0.0;
  double wall_clock_seconds = 0.0;
  std::vector<AttentionMask> masks;
  ModelParams params;
  /// dam and two_stage: the final noise-free σ(α) per head.
  HeadMasks probabilities;

  /// {"config", "seed", "heldout_loss", "wall_clock_seconds",
  ///  "mask_sparsity", "metrics"}.
  std::string to_json() const;
  /// "step,phase,mlm_loss,l1_term,total_loss,sparsity" after `# ` header lines.
  std::string metrics_csv(std::string_view header = {}) const;

 private:
  std::string config_json_;
  std::uint64_t seed_;
  std::vector<MetricRow> metrics_;
};

/// The config snapshot stored in every TrainRun.
std::string run_config_json(const RunConfig& config);

/// Deterministic in (config, seed); the corpus is regenerated from
/// config.train.corpus. `log_every` thins the metrics (the last step is
/// always kept).
TrainRun train(const RunConfig& config, std::size_t log_every = 1);
TrainRun train(const RunConfig& config, const Corpus& corpus, std::size_t log_every = 1);

/// The masks a non-learned source trains under.
std::vector<AttentionMask> source_masks(const RunConfig& config);

struct ModelGradcheck {
  GradcheckResult weights;
  GradcheckResult alpha_unstructured;
  GradcheckResult alpha_structured;
  std::size_t weight_count = 0;
  std::size_t alpha_count = 0;

  double max_rel_error() const;
};

/// Central differences of the DAM loss (MLM + λ Σ M, one frozen noise draw)
/// against the analytic gradient, over every weight and every logit of both
/// layouts. Weights are uniform(±init_scale), logits alpha_init ± 2, λ = 1e-3.
ModelGradcheck model_gradcheck(const TrainConfig& preset, std::uint64_t seed,
                               std::size_t batch_size = 2, double step = 1e-5);

/// Writes text, creating parent directories; throws std::runtime_error.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sparsemask
