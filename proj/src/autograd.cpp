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

#include "semiasr/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "semiasr/ctc.hpp"
#include "semiasr/errors.hpp"

namespace semiasr {

std::string_view op_name(OpTag tag) {
  switch (tag) {
    case OpTag::kConstant: return "constant";
    case OpTag::kLeaf: return "leaf";
    case OpTag::kMatmul: return "matmul";
    case OpTag::kAdd: return "add";
    case OpTag::kSub: return "sub";
    case OpTag::kMul: return "mul";
    case OpTag::kScale: return "scale";
    case OpTag::kTanh: return "tanh";
    case OpTag::kSigmoid: return "sigmoid";
    case OpTag::kRelu: return "relu";
    case OpTag::kSoftmax: return "softmax";
    case OpTag::kLogSoftmax: return "log_softmax";
    case OpTag::kLog: return "log";
    case OpTag::kExp: return "exp";
    case OpTag::kConcat: return "concat";
    case OpTag::kSlice: return "slice";
    case OpTag::kSum: return "sum";
    case OpTag::kMean: return "mean";
    case OpTag::kL1Norm: return "l1_norm";
    case OpTag::kSquaredNorm: return "squared_norm";
    case OpTag::kEmbeddingLookup: return "embedding_lookup";
    case OpTag::kTranspose: return "transpose";
    case OpTag::kSqDist: return "sq_dist";
    case OpTag::kCtcLogProb: return "ctc_log_prob";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(id_); }
Tensor Var::grad() const { return graph_->grad(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant holds non-finite value");
  nodes_.push_back(Node{OpTag::kConstant, {}, std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
  if (!value.all_finite()) throw NumericError("leaf holds non-finite value");
  nodes_.push_back(
      Node{OpTag::kLeaf, {}, std::move(value), {}, grad_enabled_, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const std::string& name, const Tensor& value) {
  auto it = parameter_ids_.find(name);
  if (it != parameter_ids_.end()) return Var(this, it->second);
  Var v = leaf(value);
  parameter_ids_.emplace(name, v.id());
  parameter_order_.emplace_back(name, v.id());
  return v;
}

Var Graph::record(OpTag tag, std::vector<std::size_t> inputs, Tensor value,
                  Backward backward) {
  if (!value.all_finite())
    throw NumericError("op '" + std::string(op_name(tag)) +
                       "' produced a non-finite value");
  bool needs = grad_enabled_ && any_requires_grad(inputs);
  nodes_.push_back(Node{tag, std::move(inputs), std::move(value), {}, needs,
                        needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

bool Graph::any_requires_grad(std::span<const std::size_t> ids) const {
  for (std::size_t id : ids)
    if (nodes_[id].requires_grad) return true;
  return false;
}

std::vector<double>& Graph::mutable_grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Tensor Graph::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return Tensor(n.value.shape(), n.grad);
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw Error("backward: loss belongs to another graph");
  if (nodes_[loss.id()].value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_string(nodes_[loss.id()].value.shape()));
  if (!nodes_[loss.id()].requires_grad) return;
  mutable_grad(loss.id())[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

std::map<std::string, Tensor> Graph::parameter_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : parameter_order_) out.emplace(name, grad(id));
  return out;
}

namespace {

void require(bool ok, OpTag tag, const std::string& what) {
  if (!ok)
    throw ShapeError("op '" + std::string(op_name(tag)) + "': " + what);
}

std::string shapes_of(const Tensor& a, const Tensor& b) {
  return shape_string(a.shape()) + " vs " + shape_string(b.shape());
}

Graph& graph_of(Var a, Var b) {
  if (&a.graph() != &b.graph())
    throw Error("operands belong to different graphs");
  return a.graph();
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

// How b broadcasts against a.
enum class Bcast { kSame, kRow, kCol, kScalar };

Bcast broadcast_kind(OpTag tag, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (b.size() == 1) return Bcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::kCol;
  throw ShapeError("op '" + std::string(op_name(tag)) +
                   "': shape mismatch " + shapes_of(a, b));
}

inline std::size_t bidx(Bcast k, std::size_t r, std::size_t c,
                        std::size_t cols) {
  switch (k) {
    case Bcast::kSame: return r * cols + c;
    case Bcast::kRow: return c;
    case Bcast::kCol: return r;
    case Bcast::kScalar: return 0;
  }
  return 0;
}

template <typename Fwd, typename DA, typename DB>
Var binary(OpTag tag, Var a, Var b, Fwd fwd, DA da, DB db) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Bcast kind = broadcast_kind(tag, av, bv);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = fwd(av[r * cols + c], bv[bidx(kind, r, c, cols)]);
  std::size_t ia = a.id(), ib = b.id();
  return g.record(
      tag, {ia, ib}, std::move(out),
      [ia, ib, kind, rows, cols, da, db](Graph& g, std::size_t self) {
        const auto& go = g.grad_buffer(self);
        const Tensor& av = g.value(ia);
        const Tensor& bv = g.value(ib);
        if (g.requires_grad(ia)) {
          auto& ga = g.mutable_grad(ia);
          for (std::size_t i = 0; i < rows * cols; ++i)
            ga[i] += go[i] * da(av[i], bv[bidx(kind, i / cols, i % cols, cols)]);
        }
        if (g.requires_grad(ib)) {
          auto& gb = g.mutable_grad(ib);
          for (std::size_t i = 0; i < rows * cols; ++i) {
            std::size_t j = bidx(kind, i / cols, i % cols, cols);
            gb[j] += go[i] * db(av[i], bv[j]);
          }
        }
      });
}

// Elementwise op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(OpTag tag, Var a, Fwd fwd, Deriv deriv) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  std::size_t ia = a.id();
  return g.record(tag, {ia}, std::move(out),
                  [ia, deriv](Graph& g, std::size_t self) {
                    const auto& go = g.grad_buffer(self);
                    const Tensor& x = g.value(ia);
                    const Tensor& y = g.value(self);
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t i = 0; i < ga.size(); ++i)
                      ga[i] += go[i] * deriv(x[i], y[i]);
                  });
}

// Reduction to a single element with d out / d x_i = deriv(x_i).
template <typename Deriv>
Var reduce(OpTag tag, Var a, double value, Deriv deriv) {
  Graph& g = a.graph();
  std::size_t ia = a.id();
  return g.record(tag, {ia}, Tensor::scalar(value),
                  [ia, deriv](Graph& g, std::size_t self) {
                    double go = g.grad_buffer(self)[0];
                    const Tensor& x = g.value(ia);
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t i = 0; i < ga.size(); ++i)
                      ga[i] += go * deriv(x[i]);
                  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  require(bv.rows() == k, OpTag::kMatmul,
          "inner dimensions differ " + shapes_of(av, bv));
  Tensor out = Tensor::zeros(matrix_shape(m, n));
  const double* A = av.data();
  const double* B = bv.data();
  double* C = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  std::size_t ia = a.id(), ib = b.id();
  return g.record(OpTag::kMatmul, {ia, ib}, std::move(out),
                  [ia, ib, m, k, n](Graph& g, std::size_t self) {
                    const double* G = g.grad_buffer(self).data();
                    const double* A = g.value(ia).data();
                    const double* B = g.value(ib).data();
                    if (g.requires_grad(ia)) {
                      double* GA = g.mutable_grad(ia).data();
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          const double* grow = G + i * n;
                          const double* brow = B + p * n;
                          double acc = 0.0;
                          for (std::size_t j = 0; j < n; ++j)
                            acc += grow[j] * brow[j];
                          GA[i * k + p] += acc;
                        }
                    }
                    if (g.requires_grad(ib)) {
                      double* GB = g.mutable_grad(ib).data();
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          const double aip = A[i * k + p];
                          if (aip == 0.0) continue;
                          const double* grow = G + i * n;
                          double* gbrow = GB + p * n;
                          for (std::size_t j = 0; j < n; ++j)
                            gbrow[j] += aip * grow[j];
                        }
                    }
                  });
}

Var add(Var a, Var b) {
  return binary(
      OpTag::kAdd, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      OpTag::kSub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      OpTag::kMul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
  return unary(
      OpTag::kScale, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(
      OpTag::kTanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      OpTag::kSigmoid, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      OpTag::kRelu, a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var log(Var a) {
  return unary(
      OpTag::kLog, a,
      [](double x) {
        if (!(x > 0)) return -std::numeric_limits<double>::infinity();
        return std::log(x);
      },
      [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(
      OpTag::kExp, a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var softmax(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  require(cols > 0, OpTag::kSoftmax, "empty rows");
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  std::size_t ia = a.id();
  return g.record(OpTag::kSoftmax, {ia}, std::move(out),
                  [ia, rows, cols](Graph& g, std::size_t self) {
                    const auto& go = g.grad_buffer(self);
                    const Tensor& y = g.value(self);
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c)
                        dot += go[r * cols + c] * y[r * cols + c];
                      for (std::size_t c = 0; c < cols; ++c)
                        ga[r * cols + c] +=
                            y[r * cols + c] * (go[r * cols + c] - dot);
                    }
                  });
}

Var log_softmax(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  require(cols > 0, OpTag::kLogSoftmax, "empty rows");
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - mx);
    double lz = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] - lz;
  }
  std::size_t ia = a.id();
  return g.record(OpTag::kLogSoftmax, {ia}, std::move(out),
                  [ia, rows, cols](Graph& g, std::size_t self) {
                    const auto& go = g.grad_buffer(self);
                    const Tensor& y = g.value(self);
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double total = 0.0;
                      for (std::size_t c = 0; c < cols; ++c)
                        total += go[r * cols + c];
                      for (std::size_t c = 0; c < cols; ++c)
                        ga[r * cols + c] +=
                            go[r * cols + c] - std::exp(y[r * cols + c]) * total;
                    }
                  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  require(!parts.empty(), OpTag::kConcat, "no inputs");
  require(axis <= 1, OpTag::kConcat, "axis must be 0 or 1");
  Graph& g = parts[0].graph();
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  std::size_t rows = 0, cols = 0;
  const Tensor& first = parts[0].value();
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw Error("concat: operands from different graphs");
    const Tensor& v = p.value();
    if (axis == 0) {
      require(v.cols() == first.cols(), OpTag::kConcat,
              "column count mismatch " + shapes_of(first, v));
      rows += v.rows();
      cols = v.cols();
    } else {
      require(v.rows() == first.rows(), OpTag::kConcat,
              "row count mismatch " + shapes_of(first, v));
      cols += v.cols();
      rows = v.rows();
    }
    ids.push_back(p.id());
  }
  Tensor out = Tensor::zeros(matrix_shape(rows, cols));
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (axis == 0) {
      std::copy(v.data(), v.data() + v.size(), out.data() + offset * cols);
      offset += v.rows();
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        std::copy(v.data() + r * v.cols(), v.data() + (r + 1) * v.cols(),
                  out.data() + r * cols + offset);
      offset += v.cols();
    }
  }
  return g.record(
      OpTag::kConcat, ids, std::move(out),
      [ids, axis, rows, cols](Graph& g, std::size_t self) {
        const auto& go = g.grad_buffer(self);
        std::size_t offset = 0;
        for (std::size_t id : ids) {
          const Tensor& v = g.value(id);
          const std::size_t vr = v.rows(), vc = v.cols();
          if (g.requires_grad(id)) {
            auto& gi = g.mutable_grad(id);
            for (std::size_t r = 0; r < vr; ++r)
              for (std::size_t c = 0; c < vc; ++c)
                gi[r * vc + c] += axis == 0
                                      ? go[(offset + r) * cols + c]
                                      : go[r * cols + offset + c];
          }
          offset += axis == 0 ? vr : vc;
        }
        (void)rows;
      });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  require(axis <= 1, OpTag::kSlice, "axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? rows : cols;
  require(begin < end && end <= extent, OpTag::kSlice,
          "range [" + std::to_string(begin) + "," + std::to_string(end) +
              ") invalid for shape " + shape_string(av.shape()));
  const std::size_t orows = axis == 0 ? end - begin : rows;
  const std::size_t ocols = axis == 0 ? cols : end - begin;
  Tensor out = Tensor::zeros(matrix_shape(orows, ocols));
  for (std::size_t r = 0; r < orows; ++r)
    for (std::size_t c = 0; c < ocols; ++c)
      out[r * ocols + c] = axis == 0 ? av[(begin + r) * cols + c]
                                     : av[r * cols + begin + c];
  std::size_t ia = a.id();
  return g.record(OpTag::kSlice, {ia}, std::move(out),
                  [ia, axis, begin, orows, ocols, cols](Graph& g,
                                                        std::size_t self) {
                    const auto& go = g.grad_buffer(self);
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t r = 0; r < orows; ++r)
                      for (std::size_t c = 0; c < ocols; ++c) {
                        std::size_t src = axis == 0 ? (begin + r) * cols + c
                                                    : r * cols + begin + c;
                        ga[src] += go[r * ocols + c];
                      }
                  });
}

Var sum(Var a) {
  const auto v = a.value().values();
  return reduce(OpTag::kSum, a, std::accumulate(v.begin(), v.end(), 0.0),
                [](double) { return 1.0; });
}

Var mean(Var a) {
  const auto v = a.value().values();
  require(!v.empty(), OpTag::kMean, "empty tensor");
  const double n = static_cast<double>(v.size());
  return reduce(OpTag::kMean, a, std::accumulate(v.begin(), v.end(), 0.0) / n,
                [n](double) { return 1.0 / n; });
}

Var l1_norm(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += std::abs(x);
  return reduce(OpTag::kL1Norm, a, s, [](double x) {
    return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  });
}

Var squared_norm(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x * x;
  return reduce(OpTag::kSquaredNorm, a, s, [](double x) { return 2.0 * x; });
}

Var embedding_lookup(Var table, std::span<const std::size_t> indices) {
  Graph& g = table.graph();
  const Tensor& tv = table.value();
  const std::size_t cols = tv.cols();
  require(!indices.empty(), OpTag::kEmbeddingLookup, "no indices");
  for (std::size_t i : indices)
    if (i >= tv.rows())
      throw ShapeError("op 'embedding_lookup': index " + std::to_string(i) +
                       " out of range for table " + shape_string(tv.shape()));
  Tensor out = Tensor::zeros(matrix_shape(indices.size(), cols));
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy(tv.data() + indices[r] * cols, tv.data() + (indices[r] + 1) * cols,
              out.data() + r * cols);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::size_t it = table.id();
  return g.record(OpTag::kEmbeddingLookup, {it}, std::move(out),
                  [it, idx = std::move(idx), cols](Graph& g, std::size_t self) {
                    const auto& go = g.grad_buffer(self);
                    auto& gt = g.mutable_grad(it);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                      for (std::size_t c = 0; c < cols; ++c)
                        gt[idx[r] * cols + c] += go[r * cols + c];
                  });
}

Var transpose(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::zeros(matrix_shape(cols, rows));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = av[r * cols + c];
  std::size_t ia = a.id();
  return g.record(OpTag::kTranspose, {ia}, std::move(out),
                  [ia, rows, cols](Graph& g, std::size_t self) {
                    const auto& go = g.grad_buffer(self);
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < cols; ++c)
                        ga[r * cols + c] += go[c * rows + r];
                  });
}

Var sq_dist(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), n = bv.rows(), d = av.cols();
  require(bv.cols() == d, OpTag::kSqDist,
          "feature widths differ " + shapes_of(av, bv));
  Tensor out = Tensor::zeros(matrix_shape(m, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double diff = av[i * d + k] - bv[j * d + k];
        s += diff * diff;
      }
      out[i * n + j] = s;
    }
  std::size_t ia = a.id(), ib = b.id();
  return g.record(
      OpTag::kSqDist, {ia, ib}, std::move(out),
      [ia, ib, m, n, d](Graph& g, std::size_t self) {
        const auto& go = g.grad_buffer(self);
        const Tensor& av = g.value(ia);
        const Tensor& bv = g.value(ib);
        const bool ga_on = g.requires_grad(ia), gb_on = g.requires_grad(ib);
        double* ga = ga_on ? g.mutable_grad(ia).data() : nullptr;
        double* gb = gb_on ? g.mutable_grad(ib).data() : nullptr;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double w = 2.0 * go[i * n + j];
            if (w == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) {
              const double diff = av[i * d + k] - bv[j * d + k];
              if (ga) ga[i * d + k] += w * diff;
              if (gb) gb[j * d + k] -= w * diff;
            }
          }
      });
}

Var ctc_log_prob(Var log_probs, std::span<const int> labels, int blank) {
  Graph& g = log_probs.graph();
  const bool want = g.grad_enabled() && log_probs.requires_grad();
  CtcResult res = ctc_forward_backward(log_probs.value(), labels, blank, want);
  std::size_t ia = log_probs.id();
  return g.record(OpTag::kCtcLogProb, {ia}, Tensor::scalar(res.log_prob),
                  [ia, occ = std::move(res.occupancy)](Graph& g,
                                                       std::size_t self) {
                    const double go = g.grad_buffer(self)[0];
                    auto& ga = g.mutable_grad(ia);
                    for (std::size_t i = 0; i < ga.size(); ++i)
                      ga[i] += go * occ[i];
                  });
}

Var l1_distance(Var a, Var b) {
  if (a.value().shape() != b.value().shape() &&
      !(a.value().same_shape(b.value())))
    throw ShapeError("l1_distance: shape mismatch " +
                     shapes_of(a.value(), b.value()));
  return l1_norm(sub(a, b));
}

Var apply(OpTag tag, std::span<const Var> in, const OpArgs& args) {
  auto need = [&](std::size_t n) {
    if (in.size() != n)
      throw ShapeError("op '" + std::string(op_name(tag)) + "' expects " +
                       std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
  };
  switch (tag) {
    case OpTag::kMatmul: need(2); return matmul(in[0], in[1]);
    case OpTag::kAdd: need(2); return add(in[0], in[1]);
    case OpTag::kSub: need(2); return sub(in[0], in[1]);
    case OpTag::kMul: need(2); return mul(in[0], in[1]);
    case OpTag::kScale: need(1); return scale(in[0], args.factor);
    case OpTag::kTanh: need(1); return tanh(in[0]);
    case OpTag::kSigmoid: need(1); return sigmoid(in[0]);
    case OpTag::kRelu: need(1); return relu(in[0]);
    case OpTag::kSoftmax: need(1); return softmax(in[0]);
    case OpTag::kLogSoftmax: need(1); return log_softmax(in[0]);
    case OpTag::kLog: need(1); return log(in[0]);
    case OpTag::kExp: need(1); return exp(in[0]);
    case OpTag::kConcat: return concat(in, args.axis);
    case OpTag::kSlice: need(1); return slice(in[0], args.axis, args.begin, args.end);
    case OpTag::kSum: need(1); return sum(in[0]);
    case OpTag::kMean: need(1); return mean(in[0]);
    case OpTag::kL1Norm: need(1); return l1_norm(in[0]);
    case OpTag::kSquaredNorm: need(1); return squared_norm(in[0]);
    case OpTag::kEmbeddingLookup: need(1); return embedding_lookup(in[0], args.indices);
    case OpTag::kTranspose: need(1); return transpose(in[0]);
    case OpTag::kSqDist: need(2); return sq_dist(in[0], in[1]);
    case OpTag::kCtcLogProb: need(1); return ctc_log_prob(in[0], args.labels, args.blank);
    case OpTag::kConstant:
    case OpTag::kLeaf:
      break;
  }
  throw Error("apply: '" + std::string(op_name(tag)) + "' is not an operation");
}

}  // namespace semiasr
