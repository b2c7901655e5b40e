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

// Minimal reverse-mode automatic differentiation over 2-D double tensors.
//
// A Graph is a tape: every operation appends a node holding its forward
// value and a closure that pushes the node's gradient to its inputs.
// backward() walks the tape once in reverse. Nodes are never mutated after
// they are recorded. A graph constructed with grad disabled records values
// only, which is what decoding and evaluation use.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semiasr/tensor.hpp"

namespace semiasr {

enum class OpTag {
  kConstant,
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kTanh,
  kSigmoid,
  kRelu,
  kSoftmax,
  kLogSoftmax,
  kLog,
  kExp,
  kConcat,
  kSlice,
  kSum,
  kMean,
  kL1Norm,
  kSquaredNorm,
  kEmbeddingLookup,
  kTranspose,
  kSqDist,
  kCtcLogProb,
};

std::string_view op_name(OpTag tag);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  // Gradient after Graph::backward(); zeros if nothing reached this node.
  Tensor grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Extra, op-specific arguments for apply().
struct OpArgs {
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double factor = 1.0;
  std::vector<std::size_t> indices;
  std::vector<int> labels;
  int blank = 0;
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Leaf bound to a named model parameter. Repeated calls with the same name
  // return the same node, so every use of a parameter accumulates into one
  // gradient.
  Var parameter(const std::string& name, const Tensor& value);

  // Seeds d(loss)/d(loss) = 1 and propagates to every node. Throws unless
  // loss has exactly one element.
  void backward(Var loss);

  // Gradients of every parameter() leaf, keyed by parameter name.
  std::map<std::string, Tensor> parameter_grads() const;

  OpTag tag(std::size_t id) const { return nodes_[id].tag; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor grad(std::size_t id) const;

  // Used by operation implementations.
  Var record(OpTag tag, std::vector<std::size_t> inputs, Tensor value,
             Backward backward);
  bool any_requires_grad(std::span<const std::size_t> ids) const;
  const std::vector<double>& grad_buffer(std::size_t id) const {
    return nodes_[id].grad;
  }
  // Zero-initialized on first access.
  std::vector<double>& mutable_grad(std::size_t id);

 private:
  struct Node {
    OpTag tag;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::unordered_map<std::string, std::size_t> parameter_ids_;
  std::vector<std::pair<std::string, std::size_t>> parameter_order_;
};

// Generic dispatcher: runs the operation named by tag on inputs.
Var apply(OpTag tag, std::span<const Var> inputs, const OpArgs& args = {});

// Elementwise binary ops accept b with the same shape as a, a 1xN row
// (broadcast over rows), an Mx1 column (broadcast over columns), or a single
// element.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
// Row-wise, with max subtraction.
Var softmax(Var a);
Var log_softmax(Var a);
Var log(Var a);
Var exp(Var a);
// axis 0 stacks rows, axis 1 stacks columns.
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var sum(Var a);
Var mean(Var a);
// Subgradient of |x| at 0 is 0.
Var l1_norm(Var a);
Var squared_norm(Var a);
// Rows of table selected by indices; gradient scatters back additively.
Var embedding_lookup(Var table, std::span<const std::size_t> indices);
Var transpose(Var a);
// out(i, j) = ||a_i - b_j||^2 for rows a_i of a and b_j of b.
Var sq_dist(Var a, Var b);
// log Pr(labels | log_probs) summed over all blank-augmented alignments.
// log_probs is U x V and holds per-frame log-probabilities.
Var ctc_log_prob(Var log_probs, std::span<const int> labels, int blank);

// sum |a - b|; shapes must match exactly.
Var l1_distance(Var a, Var b);

}  // namespace semiasr
