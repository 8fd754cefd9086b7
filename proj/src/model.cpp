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

#include "sparsemask/model.hpp"

#include <algorithm>
#include <cmath>

namespace sparsemask {

void TransformerConfig::validate() const {
  if (n < 1 || d < 1 || heads < 1 || d_ff < 1 || blocks < 1 || vocab < 1)
    throw std::invalid_argument("transformer dimensions must all be >= 1");
  if (d % heads != 0)
    throw std::invalid_argument("embedding size " + std::to_string(d) +
                                " is not divisible by head count " + std::to_string(heads));
  if (!(mask_constant > 0.0)) throw std::invalid_argument("mask constant c must be > 0");
}

ModelParams ModelParams::zeros(const TransformerConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const auto dh = config.head_dim();
  p.token_embedding = Matrix(config.vocab, config.d);
  p.position_embedding = Matrix(config.n, config.d);
  p.blocks.resize(config.blocks);
  for (auto& b : p.blocks) {
    b.heads.resize(config.heads);
    for (auto& h : b.heads) {
      h.wq = Matrix(config.d, dh);
      h.wk = Matrix(config.d, dh);
      h.wv = Matrix(config.d, dh);
      h.wo = Matrix(config.d, dh);
    }
    b.w1 = Matrix(config.d, config.d_ff);
    b.b1 = Matrix(1, config.d_ff);
    b.w2 = Matrix(config.d_ff, config.d);
    b.b2 = Matrix(1, config.d);
  }
  p.out_weight = Matrix(config.d, config.vocab);
  p.out_bias = Matrix(1, config.vocab);
  return p;
}

ModelParams ModelParams::init(const TransformerConfig& config, Rng& rng, double scale) {
  ModelParams p = zeros(config);
  p.for_each([&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = rng.uniform(-scale, scale);
  });
  return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("embed.token", token_embedding);
  fn("embed.position", position_embedding);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string bp = "block" + std::to_string(b) + ".";
    auto& blk = blocks[b];
    for (std::size_t h = 0; h < blk.heads.size(); ++h) {
      const std::string hp = bp + "head" + std::to_string(h) + ".";
      fn(hp + "wq", blk.heads[h].wq);
      fn(hp + "wk", blk.heads[h].wk);
      fn(hp + "wv", blk.heads[h].wv);
      fn(hp + "wo", blk.heads[h].wo);
    }
    fn(bp + "ff.w1", blk.w1);
    fn(bp + "ff.b1", blk.b1);
    fn(bp + "ff.w2", blk.w2);
    fn(bp + "ff.b2", blk.b2);
  }
  fn("out.weight", out_weight);
  fn("out.bias", out_bias);
}

void ModelParams::for_each(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&](const std::string& name, Matrix& m) { fn(name, m); });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t c = 0;
  for_each([&](const std::string&, const Matrix& m) { c += m.size(); });
  return c;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each([&](const std::string&, const Matrix& m) {
    flat.insert(flat.end(), m.values().begin(), m.values().end());
  });
  return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("unflatten: expected " + std::to_string(parameter_count()) +
                                " values, got " + std::to_string(flat.size()));
  std::size_t off = 0;
  for_each([&](const std::string&, Matrix& m) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), m.size(), m.values().begin());
    off += m.size();
  });
}

void ModelParams::axpy(double s, const ModelParams& other) {
  std::vector<const Matrix*> src;
  other.for_each([&](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  for_each([&](const std::string&, Matrix& m) { m.axpy(s, *src.at(i++)); });
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.all_finite(); });
  return ok;
}

HeadMasks full_masks(const TransformerConfig& config) {
  return HeadMasks(config.heads, Matrix(config.n, config.n, 1.0));
}

namespace {

double logit_scale(const TransformerConfig& cfg) {
  return cfg.scale_scores ? 1.0 / std::sqrt(static_cast<double>(cfg.head_dim())) : 1.0;
}

void check_masks(const HeadMasks& masks, const TransformerConfig& cfg, std::size_t n) {
  if (masks.size() != cfg.heads)
    throw std::invalid_argument("expected " + std::to_string(cfg.heads) + " head masks, got " +
                                std::to_string(masks.size()));
  for (const auto& m : masks)
    if (m.rows() != n || m.cols() != n)
      throw std::invalid_argument("head mask must be " + std::to_string(n) + "x" +
                                  std::to_string(n));
}

// In-place row softmax on a scratch matrix.
void softmax_inplace(Matrix& s) {
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    const double inv = 1.0 / sum;
    for (double& v : row) v *= inv;
  }
}

struct HeadCache {
  Matrix q, k, v;
  Matrix soft;  // softmax of the logits (multiplicative mode input to P ⊙ ·)
  Matrix a;     // attention actually applied to V
  Matrix hv;    // a · v
};

struct BlockCache {
  Matrix x;
  std::vector<HeadCache> heads;
  Matrix z;
  Matrix h_pre;
  Matrix h;
};

struct SequenceCache {
  std::vector<BlockCache> blocks;
  Matrix y;
};

// Forward for one head; fills `hc` with everything the backward pass needs.
void head_forward(const Matrix& x, const HeadParams& head, const Matrix& p,
                  const TransformerConfig& cfg, HeadCache& hc) {
  hc.q = matmul(x, head.wq);
  hc.k = matmul(x, head.wk);
  hc.v = matmul(x, head.wv);
  Matrix s = matmul_bt(hc.q, hc.k);
  const double scale = logit_scale(cfg);
  if (scale != 1.0) s *= scale;
  const std::size_t n = s.rows();
  if (cfg.mask_application == MaskApplication::additive) {
    const double c = cfg.mask_constant;
    for (std::size_t i = 0; i < n; ++i) {
      auto sr = s.row(i);
      const auto pr = p.row(i);
      for (std::size_t j = 0; j < n; ++j) sr[j] -= c * (1.0 - pr[j]);
    }
    softmax_inplace(s);
    hc.a = std::move(s);
  } else {
    softmax_inplace(s);
    hc.soft = s;
    for (std::size_t i = 0; i < n; ++i) {
      auto sr = s.row(i);
      const auto pr = p.row(i);
      for (std::size_t j = 0; j < n; ++j) sr[j] *= pr[j];
    }
    hc.a = std::move(s);
  }
  hc.hv = matmul(hc.a, hc.v);
}

Matrix block_forward(const Matrix& x, const BlockParams& blk, const HeadMasks& masks,
                     const TransformerConfig& cfg, BlockCache& bc) {
  bc.x = x;
  bc.heads.resize(blk.heads.size());
  Matrix z = x;
  for (std::size_t h = 0; h < blk.heads.size(); ++h) {
    head_forward(x, blk.heads[h], masks[h], cfg, bc.heads[h]);
    z += matmul_bt(bc.heads[h].hv, blk.heads[h].wo);
  }
  Matrix h_pre = matmul(z, blk.w1);
  for (std::size_t i = 0; i < h_pre.rows(); ++i) {
    auto r = h_pre.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += blk.b1(0, j);
  }
  Matrix hid = h_pre;
  for (double& v : hid.values()) v = std::max(v, 0.0);
  Matrix y = matmul(hid, blk.w2);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    const auto zr = z.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += zr[j] + blk.b2(0, j);
  }
  bc.z = std::move(z);
  bc.h_pre = std::move(h_pre);
  bc.h = std::move(hid);
  return y;
}

Matrix embed(std::span<const int> tokens, const ModelParams& params) {
  const auto& cfg = params.config;
  if (tokens.size() != cfg.n)
    throw std::invalid_argument("sequence length " + std::to_string(tokens.size()) +
                                " does not match model n=" + std::to_string(cfg.n));
  Matrix x(cfg.n, cfg.d);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const int t = tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab)
      throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(cfg.vocab));
    auto xr = x.row(i);
    const auto er = params.token_embedding.row(static_cast<std::size_t>(t));
    const auto pr = params.position_embedding.row(i);
    for (std::size_t j = 0; j < cfg.d; ++j) xr[j] = er[j] + pr[j];
  }
  return x;
}

Matrix forward_sequence(std::span<const int> tokens, const ModelParams& params,
                        const HeadMasks& masks, SequenceCache& cache) {
  Matrix x = embed(tokens, params);
  cache.blocks.resize(params.blocks.size());
  for (std::size_t b = 0; b < params.blocks.size(); ++b)
    x = block_forward(x, params.blocks[b], masks, params.config, cache.blocks[b]);
  cache.y = x;
  return x;
}

void add_row_sums(Matrix& bias, const Matrix& g) {
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const auto r = g.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) bias(0, j) += r[j];
  }
}

// Backpropagates dY through every block and the embeddings.
void backward_sequence(std::span<const int> tokens, const ModelParams& params,
                       const HeadMasks& masks, const SequenceCache& cache, Matrix dy,
                       ModelParams& g, HeadMasks& mask_grad) {
  const auto& cfg = params.config;
  const double scale = logit_scale(cfg);
  const std::size_t n = cfg.n;
  for (std::size_t bi = params.blocks.size(); bi-- > 0;) {
    const auto& blk = params.blocks[bi];
    const auto& bc = cache.blocks[bi];
    auto& gb = g.blocks[bi];

    // Feed-forward sublayer.
    Matrix dh = matmul_bt(dy, blk.w2);
    add_matmul_at(gb.w2, bc.h, dy);
    add_row_sums(gb.b2, dy);
    const auto hp = bc.h_pre.values();
    auto dhv = dh.values();
    for (std::size_t i = 0; i < dhv.size(); ++i)
      if (hp[i] <= 0.0) dhv[i] = 0.0;
    add_matmul_at(gb.w1, bc.z, dh);
    add_row_sums(gb.b1, dh);
    Matrix dz = dy;
    dz += matmul_bt(dh, blk.w1);

    // Attention sublayer; the residual passes dz straight through.
    Matrix dx = dz;
    for (std::size_t h = 0; h < blk.heads.size(); ++h) {
      const auto& hw = blk.heads[h];
      const auto& hc = bc.heads[h];
      auto& gh = gb.heads[h];
      add_matmul_at(gh.wo, dz, hc.hv);
      const Matrix dhv_head = matmul(dz, hw.wo);
      Matrix da = matmul_bt(dhv_head, hc.v);
      const Matrix dv = matmul_at(hc.a, dhv_head);

      Matrix ds(n, n);
      Matrix& mg = mask_grad[h];
      if (cfg.mask_application == MaskApplication::additive) {
        const double c = cfg.mask_constant;
        for (std::size_t i = 0; i < n; ++i) {
          const auto ar = hc.a.row(i);
          const auto dar = da.row(i);
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += ar[j] * dar[j];
          auto dsr = ds.row(i);
          auto mgr = mg.row(i);
          for (std::size_t j = 0; j < n; ++j) {
            dsr[j] = ar[j] * (dar[j] - dot);
            mgr[j] += c * dsr[j];
          }
        }
      } else {
        const Matrix& p = masks[h];
        for (std::size_t i = 0; i < n; ++i) {
          const auto sr = hc.soft.row(i);
          const auto dar = da.row(i);
          const auto pr = p.row(i);
          auto mgr = mg.row(i);
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            mgr[j] += dar[j] * sr[j];
            dot += sr[j] * dar[j] * pr[j];
          }
          auto dsr = ds.row(i);
          for (std::size_t j = 0; j < n; ++j) dsr[j] = sr[j] * (dar[j] * pr[j] - dot);
        }
      }
      if (scale != 1.0) ds *= scale;
      const Matrix dq = matmul(ds, hc.k);
      const Matrix dk = matmul_at(ds, hc.q);
      add_matmul_at(gh.wq, bc.x, dq);
      add_matmul_at(gh.wk, bc.x, dk);
      add_matmul_at(gh.wv, bc.x, dv);
      dx += matmul_bt(dq, hw.wq);
      dx += matmul_bt(dk, hw.wk);
      dx += matmul_bt(dv, hw.wv);
    }
    dy = std::move(dx);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(tokens[i]);
    const auto r = dy.row(i);
    auto te = g.token_embedding.row(t);
    auto pe = g.position_embedding.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      te[j] += r[j];
      pe[j] += r[j];
    }
  }
}

// log-softmax cross-entropy of one output row; optionally writes probabilities.
double row_cross_entropy(std::span<const double> y, const ModelParams& params, int target,
                         std::vector<double>* probs) {
  const auto& cfg = params.config;
  std::vector<double> logits(params.out_bias.values().begin(), params.out_bias.values().end());
  for (std::size_t k = 0; k < cfg.d; ++k) {
    const double yk = y[k];
    const auto wr = params.out_weight.row(k);
    for (std::size_t v = 0; v < cfg.vocab; ++v) logits[v] += yk * wr[v];
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  if (probs) {
    probs->resize(cfg.vocab);
    for (std::size_t v = 0; v < cfg.vocab; ++v) (*probs)[v] = std::exp(logits[v] - lse);
  }
  return lse - logits[static_cast<std::size_t>(target)];
}

std::size_t prediction_count(const MlmBatch& batch) {
  std::size_t c = 0;
  for (const auto& ex : batch) c += ex.positions.size();
  return c;
}

}  // namespace

Matrix attention_matrix(const Matrix& x, const HeadParams& head, bool scale) {
  Matrix s = matmul_bt(matmul(x, head.wq), matmul(x, head.wk));
  if (scale) s *= 1.0 / std::sqrt(static_cast<double>(head.wq.cols()));
  return softmax_rows(s);
}

Matrix masked_attention_matrix(const Matrix& x, const HeadParams& head, const Matrix& p, double c,
                               bool scale) {
  if (!(c > 0.0)) throw std::invalid_argument("mask constant c must be > 0");
  if (p.rows() != x.rows() || p.cols() != x.rows())
    throw std::invalid_argument("soft mask shape does not match sequence length");
  Matrix s = matmul_bt(matmul(x, head.wq), matmul(x, head.wk));
  if (scale) s *= 1.0 / std::sqrt(static_cast<double>(head.wq.cols()));
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) s(i, j) -= c * (1.0 - p(i, j));
  return softmax_rows(s);
}

Matrix attention_layer_forward(const Matrix& x, const BlockParams& block, const HeadMasks& masks,
                               const TransformerConfig& config) {
  if (x.cols() != config.d) throw std::invalid_argument("attention input width must equal d");
  check_masks(masks, config, x.rows());
  Matrix out = x;
  HeadCache hc;
  for (std::size_t h = 0; h < block.heads.size(); ++h) {
    head_forward(x, block.heads[h], masks[h], config, hc);
    out += matmul_bt(hc.hv, block.heads[h].wo);
  }
  return out;
}

Matrix feedforward_forward(const Matrix& z, const BlockParams& block) {
  if (z.cols() != block.w1.rows()) throw std::invalid_argument("feed-forward input width mismatch");
  Matrix h = matmul(z, block.w1);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) = std::max(0.0, h(i, j) + block.b1(0, j));
  Matrix y = matmul(h, block.w2);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += z(i, j) + block.b2(0, j);
  return y;
}

Matrix encode(std::span<const int> tokens, const ModelParams& params, const HeadMasks& masks) {
  check_masks(masks, params.config, params.config.n);
  SequenceCache cache;
  return forward_sequence(tokens, params, masks, cache);
}

std::vector<std::vector<Matrix>> attention_maps(std::span<const int> tokens,
                                                const ModelParams& params,
                                                const HeadMasks& masks) {
  check_masks(masks, params.config, params.config.n);
  SequenceCache cache;
  forward_sequence(tokens, params, masks, cache);
  std::vector<std::vector<Matrix>> maps;
  for (auto& bc : cache.blocks) {
    auto& row = maps.emplace_back();
    for (auto& hc : bc.heads) row.push_back(std::move(hc.a));
  }
  return maps;
}

void validate_batch(const MlmBatch& batch, const TransformerConfig& config) {
  if (prediction_count(batch) == 0) throw std::invalid_argument("MLM batch has no prediction positions");
  for (const auto& ex : batch) {
    if (ex.inputs.size() != config.n)
      throw std::invalid_argument("MLM example length does not match model n");
    if (ex.positions.size() != ex.targets.size())
      throw std::invalid_argument("MLM example positions/targets size mismatch");
    for (int t : ex.inputs)
      if (t < 0 || static_cast<std::size_t>(t) >= config.vocab)
        throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary");
    for (std::size_t i = 0; i < ex.positions.size(); ++i) {
      if (ex.positions[i] >= config.n) throw std::out_of_range("prediction position outside sequence");
      if (ex.targets[i] < 0 || static_cast<std::size_t>(ex.targets[i]) >= config.vocab)
        throw std::out_of_range("target id " + std::to_string(ex.targets[i]) + " outside vocabulary");
    }
  }
}

double mlm_loss(const MlmBatch& batch, const ModelParams& params, const HeadMasks& masks) {
  validate_batch(batch, params.config);
  check_masks(masks, params.config, params.config.n);
  double total = 0.0;
  SequenceCache cache;
  for (const auto& ex : batch) {
    if (ex.positions.empty()) continue;
    const Matrix y = forward_sequence(ex.inputs, params, masks, cache);
    for (std::size_t i = 0; i < ex.positions.size(); ++i)
      total += row_cross_entropy(y.row(ex.positions[i]), params, ex.targets[i], nullptr);
  }
  return total / static_cast<double>(prediction_count(batch));
}

LossAndGrad mlm_forward_loss(const MlmBatch& batch, const ModelParams& params,
                             const HeadMasks& masks) {
  const auto& cfg = params.config;
  validate_batch(batch, cfg);
  check_masks(masks, cfg, cfg.n);
  LossAndGrad out;
  out.grad = ModelParams::zeros(cfg);
  out.mask_grad = HeadMasks(cfg.heads, Matrix(cfg.n, cfg.n));
  const double inv_count = 1.0 / static_cast<double>(prediction_count(batch));

  SequenceCache cache;
  std::vector<double> probs;
  for (const auto& ex : batch) {
    if (ex.positions.empty()) continue;
    const Matrix y = forward_sequence(ex.inputs, params, masks, cache);
    Matrix dy(cfg.n, cfg.d);
    for (std::size_t i = 0; i < ex.positions.size(); ++i) {
      const std::size_t pos = ex.positions[i];
      const auto yr = y.row(pos);
      out.loss += row_cross_entropy(yr, params, ex.targets[i], &probs) * inv_count;
      probs[static_cast<std::size_t>(ex.targets[i])] -= 1.0;
      for (double& p : probs) p *= inv_count;
      // probs now holds dL/dlogits for this position.
      auto dyr = dy.row(pos);
      for (std::size_t k = 0; k < cfg.d; ++k) {
        const auto wr = params.out_weight.row(k);
        auto gwr = out.grad.out_weight.row(k);
        double acc = 0.0;
        for (std::size_t v = 0; v < cfg.vocab; ++v) {
          gwr[v] += yr[k] * probs[v];
          acc += wr[v] * probs[v];
        }
        dyr[k] += acc;
      }
      for (std::size_t v = 0; v < cfg.vocab; ++v) out.grad.out_bias(0, v) += probs[v];
    }
    backward_sequence(ex.inputs, params, masks, cache, std::move(dy), out.grad, out.mask_grad);
  }
  return out;
}

}  // namespace sparsemask
