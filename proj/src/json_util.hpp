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

// JSON encodings of the configuration structs. Private to the library.

#pragma once

#include "json.hpp"
#include "sparsemask/corpus.hpp"
#include "sparsemask/dam.hpp"
#include "sparsemask/model.hpp"
#include "sparsemask/trainer.hpp"

namespace sparsemask {

inline void to_json(nlohmann::json& j, const TransformerConfig& c) {
  j = {{"n", c.n},
       {"d", c.d},
       {"heads", c.heads},
       {"d_ff", c.d_ff},
       {"blocks", c.blocks},
       {"vocab", c.vocab},
       {"mask_constant", c.mask_constant},
       {"scale_scores", c.scale_scores},
       {"mask_application",
        c.mask_application == MaskApplication::additive ? "additive" : "multiplicative"}};
}

inline void from_json(const nlohmann::json& j, TransformerConfig& c) {
  j.at("n").get_to(c.n);
  j.at("d").get_to(c.d);
  j.at("heads").get_to(c.heads);
  j.at("d_ff").get_to(c.d_ff);
  j.at("blocks").get_to(c.blocks);
  j.at("vocab").get_to(c.vocab);
  j.at("mask_constant").get_to(c.mask_constant);
  c.scale_scores = j.value("scale_scores", false);
  const std::string app = j.value("mask_application", std::string("additive"));
  if (app == "additive") {
    c.mask_application = MaskApplication::additive;
  } else if (app == "multiplicative") {
    c.mask_application = MaskApplication::multiplicative;
  } else {
    throw std::invalid_argument("unknown mask_application '" + app + "'");
  }
  c.validate();
}

inline void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"vocab", c.vocab},
       {"n", c.n},
       {"generator", std::string(to_string(c.generator))},
       {"train_size", c.train_size},
       {"heldout_size", c.heldout_size},
       {"branching", c.branching},
       {"noise", c.noise},
       {"seed", c.seed}};
}

inline void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = {{"kind", std::string(to_string(c.kind))}, {"lr", c.lr}};
  if (c.kind == OptimizerKind::sgd) {
    j["momentum"] = c.momentum;
  } else {
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"model", c.model},
       {"corpus", c.corpus},
       {"steps", c.steps},
       {"batch_size", c.batch_size},
       {"mask_fraction", c.mask_fraction},
       {"optimizer", c.optimizer},
       {"init_scale", c.init_scale},
       {"seed", c.seed}};
}

inline void to_json(nlohmann::json& j, const DamConfig& c) {
  j = {{"variant", std::string(to_string(c.variant))},
       {"lambda", c.lambda},
       {"tau", c.tau},
       {"tau_final", c.tau_final},
       {"alpha_init", c.alpha_init},
       {"alpha_optimizer", c.alpha_optimizer},
       {"learn_diagonal", c.learn_diagonal},
       {"gumbel_noise", c.gumbel_noise}};
}

}  // namespace sparsemask
