#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mkfusion/tensor.hpp"

namespace mkfusion {

enum class Op {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScalarMul,
  kAddRow,      // (n x m) + broadcast row (m)
  kScaleRows,   // (n x m) * broadcast column (n x 1)
  kConcatCols,
  kMean,
  kSum,
  kRowSum,      // (n x m) -> (n x 1)
  kLeakyRelu,
  kSigmoid,
  kSoftmaxRows,
  kLog,
  kSquare,
  kL2SquaredDistance,       // row-wise, -> (n x 1)
  kCrossEntropyWithLogits,  // mean over rows, target distribution in attrs
  kCosineSimilarity,        // row-wise, -> (n x 1)
};

std::string_view op_name(Op op);

struct OpAttrs {
  double scalar = 0.0;  // leaky-relu slope or scalar-mul factor
  Tensor target;        // cross-entropy target distribution (n x K)
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  double item() const { return value().item(); }
};

// Append-only record of one forward pass. Nodes are stored in creation order,
// so inputs always precede outputs and reverse order is a valid backward
// schedule.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to an external tensor; backward() accumulates into its grad.
  Var parameter(const Tensor& param);
  // Leaf holding a copy; never receives gradient.
  Var constant(Tensor value);

  Var forward(Op op, std::span<const Var> inputs, OpAttrs attrs = {});

  // Accumulates d(loss)/d(leaf) into every bound parameter's grad.
  void backward(Var loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Tensor value;
    bool requires_grad = false;
    const Tensor* param = nullptr;
  };

  void check_owned(Var v) const;
  void backward_node(const Node& node, const std::vector<double>& grad_out,
                     std::vector<std::vector<double>>& grads) const;

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var add_row(Var a, Var row);
Var scale_rows(Var a, Var column);
Var concat_cols(Var a, Var b);
Var mean(Var a);
Var sum(Var a);
Var row_sum(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var sigmoid(Var a);
Var softmax_rows(Var a);
Var log(Var a);
Var square(Var a);
Var l2_squared_distance(Var a, Var b);
Var cross_entropy_with_logits(Var logits, Tensor target);
Var cosine_similarity(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

// (n x k) one-hot rows for integer labels in [0, k).
Tensor one_hot(std::span<const int> labels, std::size_t classes);

}  // namespace mkfusion
