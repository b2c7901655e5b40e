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

// Every autograd op with input shapes and a scalar-valued builder, shared
// by the unit tests and the acceptance run.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "semiasr/autograd.hpp"

namespace semiasr::testing {

// Random weights turn a matrix-valued op into a scalar without symmetry.
inline Var weighted_sum(Graph& g, Var x, Rng& rng) {
  Tensor w = random_tensor(rng, {x.rows(), x.cols()});
  return sum(mul(x, g.constant(std::move(w))));
}

// Values kept away from zero so |x| and relu stay differentiable.
inline Tensor away_from_zero(Rng& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape), 0.2, 1.0);
  for (double& x : t.values())
    if (rng.uniform() < 0.5) x = -x;
  return t;
}

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  bool positive = false;
  bool avoid_zero = false;
  std::function<Var(Graph&, const std::vector<Var>&, Rng&)> build;
};

inline std::vector<OpCase> op_cases() {
  return {
      {"matmul", {{3, 4}, {4, 2}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, matmul(v[0], v[1]), r);
       }},
      {"add", {{3, 4}, {3, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, add(v[0], v[1]), r);
       }},
      {"add_row_broadcast", {{3, 4}, {1, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, add(v[0], v[1]), r);
       }},
      {"sub", {{3, 4}, {3, 1}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, sub(v[0], v[1]), r);
       }},
      {"mul", {{3, 4}, {3, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, mul(v[0], v[1]), r);
       }},
      {"mul_scalar_broadcast", {{3, 4}, {1, 1}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, mul(v[0], v[1]), r);
       }},
      {"scale", {{2, 5}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, scale(v[0], -1.7), r);
       }},
      {"tanh", {{3, 3}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, tanh(v[0]), r);
       }},
      {"sigmoid", {{3, 3}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, sigmoid(v[0]), r);
       }},
      {"relu", {{3, 3}}, false, true,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, relu(v[0]), r);
       }},
      {"softmax", {{3, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, softmax(v[0]), r);
       }},
      {"log_softmax", {{3, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, log_softmax(v[0]), r);
       }},
      {"log", {{2, 3}}, true, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, log(v[0]), r);
       }},
      {"exp", {{2, 3}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, exp(v[0]), r);
       }},
      {"concat_rows", {{2, 3}, {1, 3}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, concat({v[0], v[1]}, 0), r);
       }},
      {"concat_cols", {{2, 3}, {2, 2}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, concat({v[0], v[1]}, 1), r);
       }},
      {"slice_rows", {{4, 3}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, slice(v[0], 0, 1, 3), r);
       }},
      {"slice_cols", {{3, 5}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, slice(v[0], 1, 2, 5), r);
       }},
      {"sum", {{3, 4}}, false, false,
       [](Graph&, const std::vector<Var>& v, Rng&) { return sum(v[0]); }},
      {"mean", {{3, 4}}, false, false,
       [](Graph&, const std::vector<Var>& v, Rng&) { return mean(v[0]); }},
      {"l1_norm", {{3, 4}}, false, true,
       [](Graph&, const std::vector<Var>& v, Rng&) { return l1_norm(v[0]); }},
      {"squared_norm", {{3, 4}}, false, false,
       [](Graph&, const std::vector<Var>& v, Rng&) { return squared_norm(v[0]); }},
      {"embedding_lookup", {{5, 3}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         std::vector<std::size_t> idx{4, 0, 4, 2};
         return weighted_sum(g, embedding_lookup(v[0], idx), r);
       }},
      {"transpose", {{2, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, transpose(v[0]), r);
       }},
      {"sq_dist", {{3, 4}, {2, 4}}, false, false,
       [](Graph& g, const std::vector<Var>& v, Rng& r) {
         return weighted_sum(g, sq_dist(v[0], v[1]), r);
       }},
      {"ctc_log_prob", {{5, 4}}, false, false,
       [](Graph&, const std::vector<Var>& v, Rng&) {
         std::vector<int> labels{1, 3, 3};
         return ctc_log_prob(log_softmax(v[0]), labels, 0);
       }},
      {"ctc_log_prob_raw", {{4, 3}}, false, false,
       [](Graph&, const std::vector<Var>& v, Rng&) {
         std::vector<int> labels{2, 1};
         return ctc_log_prob(v[0], labels, 0);
       }},
      {"l1_distance", {{2, 3}, {2, 3}}, false, true,
       [](Graph&, const std::vector<Var>& v, Rng&) { return l1_distance(v[0], v[1]); }},
  };
}

// Random inputs for one seed of an op.
inline std::vector<Tensor> op_inputs(const OpCase& op, Rng& rng) {
  std::vector<Tensor> inputs;
  for (const Shape& s : op.shapes) {
    if (op.positive) inputs.push_back(random_tensor(rng, s, 0.3, 2.0));
    else if (op.avoid_zero) inputs.push_back(away_from_zero(rng, s));
    else inputs.push_back(random_tensor(rng, s, -1.5, 1.5));
  }
  // l1_distance needs a - b away from zero, not a and b.
  if (std::string(op.name) == "l1_distance")
    for (std::size_t i = 0; i < inputs[1].size(); ++i)
      inputs[1][i] = inputs[0][i] - away_from_zero(rng, {1, 1})[0];
  return inputs;
}

inline double op_gradient_error(const OpCase& op, int seed) {
  Rng rng(derive_seed(static_cast<std::uint64_t>(seed), op.name));
  const std::vector<Tensor> inputs = op_inputs(op, rng);
  const std::uint64_t wseed = static_cast<std::uint64_t>(seed) + 1000;
  return leaf_gradient_error(inputs, [&](Graph& g, const std::vector<Var>& v) {
    Rng w(wseed);
    return op.build(g, v, w);
  });
}

}  // namespace semiasr::testing
