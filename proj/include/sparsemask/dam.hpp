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

// Differentiable attention masks. Each head owns a vector of mask logits α;
// a fixed layout maps every (i, j) cell either to one logit or to a constant.
// Masks are sampled through a Gumbel-sigmoid, trained jointly with the
// weights under an L1 penalty, and finally binarized from σ(α).

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sparsemask/checkpoint.hpp"
#include "sparsemask/corpus.hpp"
#include "sparsemask/masks.hpp"
#include "sparsemask/model.hpp"
#include "sparsemask/trainer.hpp"

namespace sparsemask {

enum class DamVariant {
  unstructured,  // one logit per unordered pair {i, j}, diagonal included
  structured,    // one logit per offset |i − j| in 1..n−2, border forced on
};

std::string_view to_string(DamVariant v);
DamVariant parse_dam_variant(std::string_view name);

/// Cell → logit map shared by all heads.
class MaskLayout {
 public:
  static constexpr std::int32_t kForcedOn = -1;
  static constexpr std::int32_t kForcedOff = -2;

  MaskLayout() = default;
  MaskLayout(DamVariant variant, std::size_t n, bool learn_diagonal);

  DamVariant variant() const { return variant_; }
  std::size_t n() const { return n_; }
  bool learn_diagonal() const { return learn_diagonal_; }
  std::size_t parameter_count() const { return count_; }

  /// Logit index of cell (i, j), or kForcedOn / kForcedOff.
  std::int32_t index(std::size_t i, std::size_t j) const { return cells_[i * n_ + j]; }

  /// Applies the layout: cell value f(logit) or the forced constant.
  Matrix expand(std::span<const double> per_param_values) const;

  /// Σ over the cells that share each logit; forced cells are skipped.
  std::vector<double> reduce(const Matrix& per_cell) const;

 private:
  DamVariant variant_ = DamVariant::unstructured;
  std::size_t n_ = 0;
  bool learn_diagonal_ = false;
  std::size_t count_ = 0;
  std::vector<std::int32_t> cells_;
};

struct DamConfig {
  DamVariant variant = DamVariant::unstructured;
  double lambda = 1e-3;
  double tau = 1.0;
  /// τ moves linearly from `tau` to `tau_final` over the run.
  double tau_final = 1.0;
  /// Initial logit. At 9.2, c(1 − σ(α)) ≈ 1 for c = 1e4.
  double alpha_init = 9.2;
  OptimizerConfig alpha_optimizer{OptimizerKind::sgd, 20.0};
  /// Structured variant: learn the interior diagonal instead of holding it off.
  bool learn_diagonal = false;
  /// Off: masks are the noise-free σ(α/τ), the relaxation used to learn a
  /// soft distribution P before pruning.
  bool gumbel_noise = true;

  void validate() const;
};

struct DamState {
  MaskLayout layout;
  std::vector<std::vector<double>> alpha;  // [head][logit]
  double tau = 1.0;
  double lambda = 0.0;

  static DamState create(const DamConfig& config, std::size_t n, std::size_t heads);

  std::size_t heads() const { return alpha.size(); }
  /// Noise-free σ(α) per head, with forced cells applied.
  HeadMasks probabilities() const;
  /// Mean of σ(α) over diagonal cells and over off-diagonal cells, all heads.
  std::pair<double, double> diagonal_means() const;
};

/// G₁ − G₂ for every logit of every head.
using DamNoise = std::vector<std::vector<double>>;

DamNoise sample_noise(const DamState& state, Rng& rng);

/// Zero noise of the right shape.
DamNoise zero_noise(const DamState& state);

/// M = σ((α + G₁ − G₂)/τ) per head; the noise is shared by every cell that
/// shares a logit, so sampled masks keep the layout's symmetry exactly.
HeadMasks soft_mask(const DamState& state, const DamNoise& noise);

struct SoftMaskSample {
  HeadMasks masks;
  DamNoise noise;
};

SoftMaskSample sample_soft_mask(const DamState& state, Rng& rng);

struct DamLossResult {
  double loss = 0.0;  // mlm + λ·l1
  double mlm = 0.0;
  double l1 = 0.0;  // Σ M over all heads and cells, before λ
  ModelParams grad_w;
  std::vector<std::vector<double>> grad_alpha;
};

/// L = MLM(masks M) + λ Σ M for a fixed noise draw.
DamLossResult dam_loss(const MlmBatch& batch, const ModelParams& params, const DamState& state,
                       const DamNoise& noise);

/// ∂(λ Σ M)/∂α alone: λ σ′((α + g)/τ)/τ times the number of cells per logit.
std::vector<std::vector<double>> l1_gradient(const DamState& state, const DamNoise& noise);

/// σ(α) ≥ 0.5 per cell, forced cells applied. Deterministic in α.
std::vector<AttentionMask> binarize(const DamState& state);

struct DamLogRow {
  std::uint64_t step = 0;
  double mlm_loss = 0.0;
  double l1_term = 0.0;  // λ Σ M
  double total_loss = 0.0;
  double binarized_sparsity = 0.0;  // mean over heads
};

/// Joint one-level optimization of weights and mask logits.
class DamTrainer {
 public:
  DamTrainer(const TrainConfig& train, const DamConfig& dam, const Corpus& corpus);

  /// One simultaneous update of w and α; appends and returns the log row.
  const DamLogRow& step();
  std::uint64_t steps_done() const { return step_; }

  const ModelParams& params() const { return params_; }
  const DamState& state() const { return state_; }
  const std::vector<DamLogRow>& log() const { return log_; }

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  double tau_at(std::uint64_t step) const;

  TrainConfig train_;
  DamConfig dam_;
  const Corpus* corpus_;
  ModelParams params_;
  DamState state_;
  Optimizer w_opt_;
  Optimizer alpha_opt_;
  std::uint64_t step_ = 0;
  std::vector<DamLogRow> log_;
};

struct DamResult {
  std::vector<AttentionMask> masks;
  DamState state;
  ModelParams params;
  std::vector<DamLogRow> log;
};

/// Runs `train.steps` DAM updates and binarizes the result.
DamResult run_dam(const TrainConfig& train, const DamConfig& dam, const Corpus& corpus);

}  // namespace sparsemask
