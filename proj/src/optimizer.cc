// Copyright 2026 The kvpf Authors.
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

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "kvpf/training.h"

namespace kvpf {

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("train config: " + what);
  };
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.lr_backbone >= 0 && c.lr_new >= 0, "learning rates must be non-negative");
  require(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1, "betas must lie in [0,1)");
  require(c.eps > 0, "eps must be positive");
  require(c.weight_decay >= 0, "weight_decay must be non-negative");
  require(c.init_std >= 0 && c.backbone_init_std >= 0, "init std must be non-negative");
}

void adamw_step(std::vector<Parameter>& params, TrainState& state,
                const TrainConfig& config, Real grad_scale) {
  for (const Parameter& p : params) {
    for (Real g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("adamw: non-finite gradient in parameter " + p.name);
      }
    }
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Parameter& p : params) {
      state.first_moment.emplace_back(p.tensor.size(), 0.0);
      state.second_moment.emplace_back(p.tensor.size(), 0.0);
    }
  }
  ++state.step;
  const Real b1 = config.beta1, b2 = config.beta2;
  const Real c1 = 1.0 - std::pow(b1, state.step);
  const Real c2 = 1.0 - std::pow(b2, state.step);
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    const Real lr = KvpModel::is_backbone(p.name) ? config.lr_backbone : config.lr_new;
    auto w = p.tensor.mutable_values();
    auto g = p.tensor.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (size_t i = 0; i < w.size(); ++i) {
      const Real grad = g.empty() ? 0.0 : g[i] * grad_scale;
      w[i] -= lr * config.weight_decay * w[i];
      m[i] = b1 * m[i] + (1 - b1) * grad;
      v[i] = b2 * v[i] + (1 - b2) * grad * grad;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
    }
  }
}

std::string loss_csv(const std::vector<LossRecord>& history) {
  std::string out = "step,L_Q,L_coarse,L_fine,L\n";
  char line[160];
  for (const LossRecord& r : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g\n", r.step, r.question,
                  r.coarse, r.fine, r.total);
    out += line;
  }
  return out;
}

}  // namespace kvpf
