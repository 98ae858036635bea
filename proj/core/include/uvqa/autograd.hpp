#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uvqa/tensor.hpp"

namespace uvqa {

/// Handle to a node of a Graph. Ids are assigned in creation order, which is
/// also a topological order.
struct Var {
  std::size_t id = 0;
};

/// Boolean attention mask, row-major, true where attention is allowed.
using Mask = std::vector<char>;

/// Tape-based reverse-mode differentiation over Tensor values.
///
/// Every op computes its output eagerly and, when any input needs a gradient,
/// records a backward rule. backward() walks the tape once in reverse creation
/// order; gradients reaching a node through several paths are summed.
/// Parameter leaves accumulate into Parameter::grad, so one graph per record
/// followed by backward() implements batch gradient accumulation.
///
/// Any op that produces a NaN or Inf throws NumericError naming the op.
class Graph {
 public:
  enum class Mode { training, inference };

  explicit Graph(Mode mode = Mode::training) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter& p);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target w.r.t. v (zeros if unreached).
  Tensor grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must hold one element.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a · bᵀ
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcasts a 1×c row over every row of a
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var softmax_rows(Var a);
  Var softmax_rows(Var a, std::shared_ptr<const Mask> mask);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var gather_rows(Var table, std::vector<std::size_t> rows);
  Var sum(Var a);
  Var sum_squares(Var a);
  /// Sum over elements of the numerically stable binary cross-entropy with
  /// logits against 0/1 targets of the same shape.
  Var bce_with_logits(Var logits, Tensor targets);
  /// -log softmax(logits)[target] for a single-row logits tensor.
  Var softmax_cross_entropy(Var logits, std::size_t target);

 private:
  using Backward = std::function<void(Graph&, std::size_t)>;

  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Parameter* parameter = nullptr;
    Tensor grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(std::string_view op, Tensor value, std::initializer_list<Var> inputs, Backward bw);
  Var push(std::string_view op, Tensor value, std::span<const Var> inputs, Backward bw);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  bool needs(std::size_t id) const { return nodes_[id].needs_grad; }
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  Tensor& accum(Var v);

  Mode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

}  // namespace uvqa
