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

#include "sparsemask/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "sparsemask/pruning.hpp"

namespace sparsemask {

std::string_view to_string(MaskSource source) {
  switch (source) {
    case MaskSource::full: return "full";
    case MaskSource::no_diag: return "no-diag";
    case MaskSource::random_drop: return "random-drop";
    case MaskSource::fixed: return "fixed";
    case MaskSource::dam: return "dam";
    case MaskSource::two_stage: return "two-stage";
  }
  return "?";
}

MaskSource parse_mask_source(std::string_view name) {
  for (MaskSource s : {MaskSource::full, MaskSource::no_diag, MaskSource::random_drop,
                       MaskSource::fixed, MaskSource::dam, MaskSource::two_stage})
    if (name == to_string(s)) return s;
  throw std::invalid_argument("unknown mask source '" + std::string(name) +
                              "' (expected full, no-diag, random-drop, fixed, dam, two-stage)");
}

void RunConfig::validate() const {
  train.validate();
  const std::size_t n = train.model.n;
  switch (source) {
    case MaskSource::random_drop:
      if (drop_count > n * n)
        throw std::invalid_argument("drop_count exceeds the n*n mask cells");
      break;
    case MaskSource::fixed:
      if (fixed_masks.size() != 1 && fixed_masks.size() != train.model.heads)
        throw std::invalid_argument("fixed source needs one mask, or one per head (" +
                                    std::to_string(train.model.heads) + ")");
      for (const auto& m : fixed_masks)
        if (m.n() != n)
          throw std::invalid_argument("fixed mask has n=" + std::to_string(m.n()) +
                                      " but the model has n=" + std::to_string(n));
      break;
    case MaskSource::dam:
      dam.validate();
      break;
    case MaskSource::two_stage:
      dam.validate();
      pruned_count(n, prune_fraction);
      break;
    default:
      break;
  }
}

TrainRun::TrainRun(std::string config_json, std::uint64_t seed)
    : config_json_(std::move(config_json)), seed_(seed) {}

void TrainRun::append(MetricRow row) { metrics_.push_back(std::move(row)); }

std::string TrainRun::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(config_json_);
  j["seed"] = seed_;
  j["heldout_loss"] = heldout_loss;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["mask_sparsity"] = masks.empty() ? 0.0 : mean_sparsity(masks);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& m : metrics_)
    rows.push_back({{"step", m.step},
                    {"phase", m.phase},
                    {"mlm_loss", m.mlm_loss},
                    {"l1_term", m.l1_term},
                    {"total_loss", m.total_loss},
                    {"sparsity", m.sparsity}});
  j["metrics"] = std::move(rows);
  return j.dump(2);
}

std::string TrainRun::metrics_csv(std::string_view header) const {
  std::ostringstream os;
  if (!header.empty()) {
    std::istringstream lines{std::string(header)};
    for (std::string line; std::getline(lines, line);) os << "# " << line << '\n';
  }
  os << "step,phase,mlm_loss,l1_term,total_loss,sparsity\n";
  os.precision(10);
  for (const auto& m : metrics_)
    os << m.step << ',' << m.phase << ',' << m.mlm_loss << ',' << m.l1_term << ','
       << m.total_loss << ',' << m.sparsity << '\n';
  return os.str();
}

std::string run_config_json(const RunConfig& config) {
  nlohmann::json j;
  j["source"] = std::string(to_string(config.source));
  j["train"] = config.train;
  switch (config.source) {
    case MaskSource::random_drop:
      j["drop_count"] = config.drop_count;
      break;
    case MaskSource::fixed: {
      auto masks = nlohmann::json::array();
      for (const auto& m : config.fixed_masks) masks.push_back(nlohmann::json::parse(mask_to_json(m)));
      j["fixed_masks"] = std::move(masks);
      break;
    }
    case MaskSource::dam:
      j["dam"] = config.dam;
      break;
    case MaskSource::two_stage:
      j["dam"] = config.dam;
      j["prune_fraction"] = config.prune_fraction;
      j["finetune_steps"] = config.finetune_steps;
      break;
    default:
      break;
  }
  return j.dump();
}

std::vector<AttentionMask> source_masks(const RunConfig& config) {
  const std::size_t n = config.train.model.n;
  const std::size_t heads = config.train.model.heads;
  std::vector<AttentionMask> out;
  switch (config.source) {
    case MaskSource::full:
      out.assign(heads, AttentionMask::full(n));
      break;
    case MaskSource::no_diag:
      out.assign(heads, drop_diagonal(AttentionMask::full(n)));
      break;
    case MaskSource::random_drop: {
      const std::size_t count = config.drop_count == 0 ? n : config.drop_count;
      for (std::size_t h = 0; h < heads; ++h) {
        Rng rng = Rng::derive(config.train.seed, kMaskStream, h);
        out.push_back(random_drop(AttentionMask::full(n), count, rng));
      }
      break;
    }
    case MaskSource::fixed:
      out = config.fixed_masks.size() == 1
                ? std::vector<AttentionMask>(heads, config.fixed_masks.front())
                : config.fixed_masks;
      break;
    default:
      throw std::invalid_argument("mask source '" + std::string(to_string(config.source)) +
                                  "' learns its masks during training");
  }
  return out;
}

namespace {

HeadMasks to_matrices(const std::vector<AttentionMask>& masks) {
  HeadMasks out;
  for (const auto& m : masks) out.push_back(m.to_matrix());
  return out;
}

bool keep_row(std::uint64_t step, std::uint64_t last, std::size_t every) {
  return step == last || step % every == 0;
}

void run_weights(WeightTrainer& t, std::size_t steps, std::uint64_t offset, const char* phase,
                 double sparsity, std::size_t every, TrainRun& run) {
  for (std::size_t s = 1; s <= steps; ++s) {
    const double loss = t.step();
    if (keep_row(s, steps, every))
      run.append({offset + s, phase, loss, 0.0, loss, sparsity});
  }
}

}  // namespace

TrainRun train(const RunConfig& config, std::size_t log_every) {
  config.train.corpus.validate();
  return train(config, make_corpus(config.train.corpus), log_every);
}

TrainRun train(const RunConfig& config, const Corpus& corpus, std::size_t log_every) {
  config.validate();
  if (log_every == 0) throw std::invalid_argument("log_every must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& tc = config.train;
  TrainRun run(run_config_json(config), tc.seed);

  if (config.source == MaskSource::dam || config.source == MaskSource::two_stage) {
    DamTrainer dam(tc, config.dam, corpus);
    for (std::size_t s = 1; s <= tc.steps; ++s) {
      const DamLogRow& r = dam.step();
      if (keep_row(s, tc.steps, log_every))
        run.append({r.step, "dam", r.mlm_loss, r.l1_term, r.total_loss, r.binarized_sparsity});
    }
    run.probabilities = dam.state().probabilities();
    if (config.source == MaskSource::dam) {
      run.masks = binarize(dam.state());
      run.params = dam.params();
      // Evaluated under the binarized masks, the ones that are kept.
      run.heldout_loss = heldout_loss(tc, corpus, run.params, to_matrices(run.masks));
    } else {
      run.masks = prune_by_scores(run.probabilities, config.prune_fraction);
      WeightTrainer ft(tc, corpus, to_matrices(run.masks), dam.params());
      run_weights(ft, config.finetune_steps, tc.steps, "finetune", mean_sparsity(run.masks),
                  log_every, run);
      run.params = ft.params();
      run.heldout_loss = ft.evaluate();
    }
  } else {
    run.masks = source_masks(config);
    WeightTrainer t(tc, corpus, to_matrices(run.masks));
    run_weights(t, tc.steps, 0, "train", mean_sparsity(run.masks), log_every, run);
    run.params = t.params();
    run.heldout_loss = t.evaluate();
  }
  run.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

double ModelGradcheck::max_rel_error() const {
  return std::max({weights.max_rel_error, alpha_unstructured.max_rel_error,
                   alpha_structured.max_rel_error});
}

namespace {

// Forward-only DAM loss for finite differences.
double dam_objective(const MlmBatch& batch, const ModelParams& params, const DamState& state,
                     const DamNoise& noise) {
  const HeadMasks masks = soft_mask(state, noise);
  double l1 = 0.0;
  for (const auto& m : masks)
    for (double v : m.values()) l1 += v;
  return mlm_loss(batch, params, masks) + state.lambda * l1;
}

std::vector<double> concat(const std::vector<std::vector<double>>& parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

GradcheckResult alpha_gradcheck(const MlmBatch& batch, const ModelParams& params,
                                DamVariant variant, Rng& rng, double step, std::size_t& count) {
  DamConfig dc;
  dc.variant = variant;
  DamState state = DamState::create(dc, params.config.n, params.config.heads);
  for (auto& a : state.alpha)
    for (double& v : a) v = rng.uniform(dc.alpha_init - 2.0, dc.alpha_init + 2.0);
  state.lambda = 1e-3;
  const DamNoise noise = sample_noise(state, rng);
  const DamLossResult r = dam_loss(batch, params, state, noise);
  const std::size_t per = state.layout.parameter_count();
  const auto f = [&](std::span<const double> x) {
    DamState s = state;
    for (std::size_t h = 0; h < s.heads(); ++h)
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(h * per), per, s.alpha[h].begin());
    return dam_objective(batch, params, s, noise);
  };
  const std::vector<double> point = concat(state.alpha);
  count += point.size();
  return gradcheck(f, point, concat(r.grad_alpha), step);
}

}  // namespace

ModelGradcheck model_gradcheck(const TrainConfig& preset, std::uint64_t seed,
                               std::size_t batch_size, double step) {
  TrainConfig tc = preset;
  tc.seed = seed;
  tc.corpus.seed = seed;
  tc.corpus.train_size = 64;
  tc.corpus.heldout_size = 8;
  tc.batch_size = batch_size;
  tc.validate();
  const Corpus corpus = make_corpus(tc.corpus);
  const MlmBatch batch = training_batch(tc, corpus, 0);
  Rng rng = Rng::derive(seed, kInitStream, 0);
  const ModelParams params = ModelParams::init(tc.model, rng, tc.init_scale);

  ModelGradcheck out;
  {
    DamConfig dc;
    DamState state = DamState::create(dc, tc.model.n, tc.model.heads);
    for (auto& a : state.alpha)
      for (double& v : a) v = rng.uniform(dc.alpha_init - 2.0, dc.alpha_init + 2.0);
    state.lambda = 1e-3;
    const DamNoise noise = sample_noise(state, rng);
    const DamLossResult r = dam_loss(batch, params, state, noise);
    const auto f = [&](std::span<const double> x) {
      ModelParams p = params;
      p.unflatten(x);
      return dam_objective(batch, p, state, noise);
    };
    const std::vector<double> point = params.flatten();
    out.weight_count = point.size();
    out.weights = gradcheck(f, point, r.grad_w.flatten(), step);
  }
  out.alpha_unstructured =
      alpha_gradcheck(batch, params, DamVariant::unstructured, rng, step, out.alpha_count);
  out.alpha_structured =
      alpha_gradcheck(batch, params, DamVariant::structured, rng, step, out.alpha_count);
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace sparsemask
