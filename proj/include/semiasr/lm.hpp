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

// Character-level recurrent language model used for shallow fusion.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "semiasr/autograd.hpp"
#include "semiasr/model.hpp"

namespace semiasr {

struct LmArch {
  std::size_t vocab_size = 0;
  std::size_t hidden = 32;

  void validate() const;
  friend bool operator==(const LmArch&, const LmArch&) = default;
};

class LmParams {
 public:
  LmParams() = default;
  // Output layer starts at zero, so the untrained model is uniform.
  static LmParams initialize(const LmArch& arch, std::uint64_t seed);
  static std::vector<std::pair<std::string, Shape>> layout(const LmArch& arch);
  static LmParams from_tensors(const LmArch& arch, ParamMap tensors);

  const LmArch& arch() const { return arch_; }
  const ParamMap& tensors() const { return tensors_; }
  ParamMap& tensors() { return tensors_; }
  const Tensor& at(const std::string& name) const;
  void validate() const;

 private:
  LmArch arch_;
  ParamMap tensors_;
};

class LmNetwork {
 public:
  LmNetwork(Graph& graph, const LmParams& params);

  Var initial_state(std::size_t batch) const;
  // Log-distribution over the next symbol after `prev`, and the new state.
  std::pair<Var, Var> step(std::span<const int> prev, Var state) const;
  // sum_t log P(y_t | y_<t) over y followed by EOS, B x 1.
  Var log_likelihood(const LabelBatch& y) const;

 private:
  Var param(const std::string& name) const;

  Graph& graph_;
  const LmParams& params_;
};

// exp(total negative log-likelihood / total predicted symbols incl. EOS).
double perplexity(const LmParams& params,
                  const std::vector<std::vector<int>>& sequences);

}  // namespace semiasr
