// Copyright 2026 The semiasr Authors
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

#include "semiasr/optimizer.hpp"

#include <cmath>

#include "semiasr/errors.hpp"

namespace semiasr {

void AdadeltaConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("adadelta rho must lie in (0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("adadelta epsilon must be positive");
}

OptimizerState OptimizerState::zeros_like(const ParamMap& params) {
  OptimizerState s;
  for (const auto& [name, t] : params) {
    s.sq_grad.emplace(name, Tensor::zeros(t.shape()));
    s.sq_delta.emplace(name, Tensor::zeros(t.shape()));
  }
  return s;
}

void OptimizerState::validate(const ParamMap& params) const {
  for (const ParamMap* acc : {&sq_grad, &sq_delta}) {
    if (acc->size() != params.size())
      throw DataError("optimizer state covers " + std::to_string(acc->size()) +
                      " parameters, model has " + std::to_string(params.size()));
    for (const auto& [name, t] : params) {
      auto it = acc->find(name);
      if (it == acc->end()) throw DataError("optimizer state lacks '" + name + "'");
      if (!it->second.same_shape(t))
        throw ShapeError("optimizer state for '" + name + "' has shape " +
                         shape_string(it->second.shape()));
      for (double v : it->second.values())
        if (!std::isfinite(v) || v < 0.0)
          throw NumericError("optimizer accumulator for '" + name + "' is invalid");
    }
  }
}

void adadelta_step(ParamMap& params, const ParamMap& grads, OptimizerState& state,
                   const AdadeltaConfig& cfg) {
  cfg.validate();
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw DataError("gradient for unknown parameter '" + name + "'");
    if (!g.same_shape(it->second))
      throw ShapeError("gradient for '" + name + "' has shape " + shape_string(g.shape()) +
                       ", parameter has " + shape_string(it->second.shape()));
    if (!g.all_finite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
  }
  if (state.sq_grad.empty() && state.sq_delta.empty()) state = OptimizerState::zeros_like(params);
  const double rho = cfg.rho, eps = cfg.epsilon;
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    const double* g = git == grads.end() ? nullptr : git->second.data();
    auto sg = state.sq_grad.find(name);
    auto sd = state.sq_delta.find(name);
    if (sg == state.sq_grad.end() || sd == state.sq_delta.end())
      throw DataError("optimizer state lacks '" + name + "'");
    double* eg = sg->second.data();
    double* ed = sd->second.data();
    double* x = p.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? g[i] : 0.0;
      eg[i] = rho * eg[i] + (1.0 - rho) * gi * gi;
      const double delta = -std::sqrt(ed[i] + eps) / std::sqrt(eg[i] + eps) * gi;
      ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
      x[i] += delta;
    }
  }
  ++state.steps;
}

double clip_gradients(ParamMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads)
      for (double& v : g.values()) v *= s;
  }
  return norm;
}

}  // namespace semiasr
