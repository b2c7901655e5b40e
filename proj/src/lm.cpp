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

#include "semiasr/lm.hpp"

#include <cmath>

#include "semiasr/errors.hpp"
#include "semiasr/rng.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {

void LmArch::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecials))
    throw ConfigError("language model vocabulary too small");
  if (hidden == 0) throw ConfigError("language model hidden width must be positive");
}

std::vector<std::pair<std::string, Shape>> LmParams::layout(const LmArch& a) {
  const std::size_t h = a.hidden, v = a.vocab_size;
  return {{"lm.embed", {v, h}},    {"lm.gru.wx", {h, 3 * h}},
          {"lm.gru.bx", {1, 3 * h}}, {"lm.gru.wh", {h, 3 * h}},
          {"lm.gru.bh", {1, 3 * h}}, {"lm.out.w", {h, v}},
          {"lm.out.b", {1, v}}};
}

LmParams LmParams::initialize(const LmArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  LmParams p;
  p.arch_ = arch;
  for (auto& [name, shape] : layout(arch)) {
    Tensor t = Tensor::zeros(shape);
    if (name == "lm.embed") {
      for (double& x : t.values()) x = rng.uniform(-0.5, 0.5);
    } else if (name == "lm.gru.wx" || name == "lm.gru.wh") {
      const double k = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      for (double& x : t.values()) x = rng.uniform(-k, k);
    }
    p.tensors_.emplace(name, std::move(t));
  }
  return p;
}

LmParams LmParams::from_tensors(const LmArch& arch, ParamMap tensors) {
  arch.validate();
  LmParams p;
  p.arch_ = arch;
  p.tensors_ = std::move(tensors);
  p.validate();
  return p;
}

const Tensor& LmParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown LM parameter '" + name + "'");
  return it->second;
}

void LmParams::validate() const {
  auto expected = layout(arch_);
  for (const auto& [name, shape] : expected) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ShapeError("missing LM parameter '" + name + "'");
    if (it->second.shape() != shape)
      throw ShapeError("LM parameter '" + name + "' has shape " +
                       shape_string(it->second.shape()) + ", expected " +
                       shape_string(shape));
  }
  if (tensors_.size() != expected.size())
    throw ShapeError("LM parameter set has unexpected entries");
}

LmNetwork::LmNetwork(Graph& graph, const LmParams& params)
    : graph_(graph), params_(params) {}

Var LmNetwork::param(const std::string& name) const {
  return graph_.parameter(name, params_.at(name));
}

Var LmNetwork::initial_state(std::size_t batch) const {
  return graph_.constant(Tensor::zeros({batch, params_.arch().hidden}));
}

std::pair<Var, Var> LmNetwork::step(std::span<const int> prev, Var state) const {
  const std::size_t v = params_.arch().vocab_size;
  std::vector<std::size_t> idx(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (prev[i] < 0 || static_cast<std::size_t>(prev[i]) >= v)
      throw DataError("LM input label " + std::to_string(prev[i]) + " out of range");
    idx[i] = static_cast<std::size_t>(prev[i]);
  }
  Var x = embedding_lookup(param("lm.embed"), idx);
  Var h = gru_cell(add(matmul(x, param("lm.gru.wx")), param("lm.gru.bx")), state,
                   param("lm.gru.wh"), param("lm.gru.bh"));
  Var logp = log_softmax(add(matmul(h, param("lm.out.w")), param("lm.out.b")));
  return {logp, h};
}

Var LmNetwork::log_likelihood(const LabelBatch& y) const {
  const std::size_t b = y.size(), v = params_.arch().vocab_size;
  const std::size_t steps = y.max_length() + 1;
  Var ones = graph_.constant(Tensor::full({v, 1}, 1.0));
  Var state = initial_state(b);
  std::vector<int> prev(b, kSos);
  Var total;
  for (std::size_t t = 0; t < steps; ++t) {
    auto [logp, h] = step(prev, state);
    Tensor pick = Tensor::zeros({b, v});
    for (std::size_t i = 0; i < b; ++i) {
      const auto& s = y.sequences[i];
      if (t < s.size()) pick[i * v + s[t]] = 1.0;
      else if (t == s.size()) pick[i * v + kEos] = 1.0;
      prev[i] = t < s.size() ? s[t] : kEos;
    }
    Var col = matmul(mul(logp, graph_.constant(std::move(pick))), ones);
    total = total.valid() ? add(total, col) : col;
    state = h;
  }
  return total;
}

double perplexity(const LmParams& params,
                  const std::vector<std::vector<int>>& sequences) {
  if (sequences.empty()) throw DataError("perplexity of an empty text set");
  double nll = 0.0;
  std::size_t count = 0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < sequences.size(); begin += kChunk) {
    const std::size_t end = std::min(sequences.size(), begin + kChunk);
    std::vector<std::vector<int>> chunk(sequences.begin() + begin,
                                        sequences.begin() + end);
    for (const auto& s : chunk) count += s.size() + 1;
    Graph g(false);
    LmNetwork net(g, params);
    for (double x : net.log_likelihood(LabelBatch::pack(std::move(chunk))).value().values())
      nll -= x;
  }
  return std::exp(nll / static_cast<double>(count));
}

}  // namespace semiasr
