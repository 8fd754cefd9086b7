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

// A deliberately plain transformer encoder: no layer norm, no score scaling
// by default, residual attention and feed-forward sublayers, and attention
// masks applied through an additive penalty −c(1 − P) on the logits. Forward
// and backward passes are written out by hand.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparsemask/numerics.hpp"

namespace sparsemask {

enum class MaskApplication {
  additive,        // softmax(S − c(1 − P)); rows stay normalized
  multiplicative,  // P ⊙ softmax(S); kept for comparison only
};

struct TransformerConfig {
  std::size_t n = 16;       // sequence length
  std::size_t d = 32;       // embedding size
  std::size_t heads = 2;
  std::size_t d_ff = 64;
  std::size_t blocks = 2;
  std::size_t vocab = 64;
  double mask_constant = 1e4;
  bool scale_scores = false;  // 1/sqrt(d_h) on the logits when set
  MaskApplication mask_application = MaskApplication::additive;

  std::size_t head_dim() const { return d / heads; }
  void validate() const;
  friend bool operator==(const TransformerConfig&, const TransformerConfig&) = default;
};

struct HeadParams {
  Matrix wq, wk, wv, wo;  // each d × d_h
  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct BlockParams {
  std::vector<HeadParams> heads;
  Matrix w1;  // d × d_ff
  Matrix b1;  // 1 × d_ff
  Matrix w2;  // d_ff × d
  Matrix b2;  // 1 × d
  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

struct ModelParams {
  TransformerConfig config;
  Matrix token_embedding;     // vocab × d
  Matrix position_embedding;  // n × d
  std::vector<BlockParams> blocks;
  Matrix out_weight;  // d × vocab
  Matrix out_bias;    // 1 × vocab

  /// Every weight uniform(−scale, scale).
  static ModelParams init(const TransformerConfig& config, Rng& rng, double scale = 0.05);
  static ModelParams zeros(const TransformerConfig& config);

  /// Visits every tensor in a fixed order with a stable name such as
  /// "block0.head1.wq"; the order defines the flat layout.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  void axpy(double s, const ModelParams& other);
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Soft or hard mask per head, n × n, entries in [0, 1]. Shared by all blocks.
using HeadMasks = std::vector<Matrix>;

HeadMasks full_masks(const TransformerConfig& config);

/// σ(X W_Q (X W_K)ᵀ).
Matrix attention_matrix(const Matrix& x, const HeadParams& head, bool scale = false);

/// σ(X W_Q (X W_K)ᵀ + Q) with Q_ij = −c(1 − P_ij).
Matrix masked_attention_matrix(const Matrix& x, const HeadParams& head, const Matrix& p,
                               double c, bool scale = false);

/// X + Σ_k Â^k(X) X W_V^k W_O^kᵀ.
Matrix attention_layer_forward(const Matrix& x, const BlockParams& block, const HeadMasks& masks,
                               const TransformerConfig& config);

/// Z + ReLU(Z W_1 + b_1) W_2 + b_2.
Matrix feedforward_forward(const Matrix& z, const BlockParams& block);

/// Token ids in, final hidden states (n × d) out.
Matrix encode(std::span<const int> tokens, const ModelParams& params, const HeadMasks& masks);

/// Every block's per-head attention matrices for one sequence, [block][head].
std::vector<std::vector<Matrix>> attention_maps(std::span<const int> tokens,
                                                const ModelParams& params, const HeadMasks& masks);

/// One masked-language-model example: the corrupted input, and which
/// positions are scored against which original ids.
struct MlmExample {
  std::vector<int> inputs;
  std::vector<std::size_t> positions;
  std::vector<int> targets;
};

using MlmBatch = std::vector<MlmExample>;

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
  /// dL/dP for each head's mask (n × n), summed over blocks.
  HeadMasks mask_grad;
};

/// Mean cross-entropy over every prediction position in the batch.
double mlm_loss(const MlmBatch& batch, const ModelParams& params, const HeadMasks& masks);

/// Loss plus gradients for every weight and every mask entry.
LossAndGrad mlm_forward_loss(const MlmBatch& batch, const ModelParams& params,
                             const HeadMasks& masks);

void validate_batch(const MlmBatch& batch, const TransformerConfig& config);

}  // namespace sparsemask
