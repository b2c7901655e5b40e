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

#pragma once

#include <cstdint>

#include "semiasr/model.hpp"

namespace semiasr {

struct AdadeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;

  void validate() const;
};

// Running averages E[g^2] and E[dx^2], keyed like the parameters.
struct OptimizerState {
  ParamMap sq_grad;
  ParamMap sq_delta;
  std::uint64_t steps = 0;

  static OptimizerState zeros_like(const ParamMap& params);
  // Throws unless the accumulators match params and are finite and >= 0.
  void validate(const ParamMap& params) const;
};

// Parameters absent from grads get a zero gradient. Throws NumericError
// naming the first parameter with a non-finite gradient, before touching
// any state.
void adadelta_step(ParamMap& params, const ParamMap& grads, OptimizerState& state,
                   const AdadeltaConfig& cfg);

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_gradients(ParamMap& grads, double max_norm);

}  // namespace semiasr
