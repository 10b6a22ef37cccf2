#include "mkfusion/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mkfusion {
namespace {

std::size_t arity(Op op) {
  switch (op) {
    case Op::kLeaf:
      return 0;
    case Op::kMatMul:
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kAddRow:
    case Op::kScaleRows:
    case Op::kConcatCols:
    case Op::kL2SquaredDistance:
    case Op::kCosineSimilarity:
      return 2;
    default:
      return 1;
  }
}

[[noreturn]] void shape_mismatch(Op op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

void require_same_shape(Op op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a, b);
}

void require_rank2(Op op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op_name(op)) + ": expected a matrix, got " + to_string(a.shape()));
  }
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Tensor column(std::size_t n, std::vector<double> data) { return Tensor({n, 1}, std::move(data)); }

Tensor compute(Op op, const std::vector<const Tensor*>& in, const OpAttrs& attrs) {
  const Tensor& a = *in[0];
  switch (op) {
    case Op::kMatMul: {
      const Tensor& b = *in[1];
      require_rank2(op, a);
      require_rank2(op, b);
      if (a.cols() != b.rows()) shape_mismatch(op, a, b);
      const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
      std::vector<double> out(n * m, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a[i * k + p];
          for (std::size_t j = 0; j < m; ++j) out[i * m + j] += av * b[p * m + j];
        }
      }
      return Tensor({n, m}, std::move(out));
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const Tensor& b = *in[1];
      require_same_shape(op, a, b);
      std::vector<double> out(a.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        switch (op) {
          case Op::kAdd: out[i] = a[i] + b[i]; break;
          case Op::kSub: out[i] = a[i] - b[i]; break;
          case Op::kMul: out[i] = a[i] * b[i]; break;
          default:
            if (b[i] == 0.0) throw NumericError("div: division by zero");
            out[i] = a[i] / b[i];
        }
      }
      return Tensor(a.shape(), std::move(out));
    }
    case Op::kScalarMul: {
      std::vector<double> out(a.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = attrs.scalar * a[i];
      return Tensor(a.shape(), std::move(out));
    }
    case Op::kAddRow: {
      const Tensor& b = *in[1];
      require_rank2(op, a);
      if (b.rows() != 1 || b.cols() != a.cols()) shape_mismatch(op, a, b);
      std::vector<double> out(a.size());
      const std::size_t m = a.cols();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i % m];
      return Tensor(a.shape(), std::move(out));
    }
    case Op::kScaleRows: {
      const Tensor& s = *in[1];
      require_rank2(op, a);
      if (s.rank() != 2 || s.cols() != 1 || s.rows() != a.rows()) shape_mismatch(op, a, s);
      std::vector<double> out(a.size());
      const std::size_t m = a.cols();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[i / m] * a[i];
      return Tensor(a.shape(), std::move(out));
    }
    case Op::kConcatCols: {
      const Tensor& b = *in[1];
      require_rank2(op, a);
      require_rank2(op, b);
      if (a.rows() != b.rows()) shape_mismatch(op, a, b);
      const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
      std::vector<double> out;
      out.reserve(n * (p + q));
      for (std::size_t i = 0; i < n; ++i) {
        out.insert(out.end(), a.data().begin() + i * p, a.data().begin() + (i + 1) * p);
        out.insert(out.end(), b.data().begin() + i * q, b.data().begin() + (i + 1) * q);
      }
      return Tensor({n, p + q}, std::move(out));
    }
    case Op::kMean:
    case Op::kSum: {
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (op == Op::kMean) s /= static_cast<double>(a.size());
      return Tensor::scalar(s);
    }
    case Op::kRowSum: {
      require_rank2(op, a);
      const std::size_t n = a.rows(), m = a.cols();
      std::vector<double> out(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[i] += a[i * m + j];
      }
      return column(n, std::move(out));
    }
    case Op::kLeakyRelu:
    case Op::kSigmoid:
    case Op::kLog:
    case Op::kSquare: {
      std::vector<double> out(a.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a[i];
        switch (op) {
          case Op::kLeakyRelu: out[i] = x > 0.0 ? x : attrs.scalar * x; break;
          case Op::kSigmoid:
            out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            break;
          case Op::kLog:
            if (x <= 0.0) throw NumericError("log: non-positive input " + std::to_string(x));
            out[i] = std::log(x);
            break;
          default: out[i] = x * x;
        }
      }
      return Tensor(a.shape(), std::move(out));
    }
    case Op::kSoftmaxRows: {
      require_rank2(op, a);
      const std::size_t n = a.rows(), m = a.cols();
      std::vector<double> out(a.size());
      for (std::size_t i = 0; i < n; ++i) {
        double peak = a[i * m];
        for (std::size_t j = 1; j < m; ++j) peak = std::max(peak, a[i * m + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          out[i * m + j] = std::exp(a[i * m + j] - peak);
          z += out[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= z;
      }
      return Tensor(a.shape(), std::move(out));
    }
    case Op::kL2SquaredDistance: {
      const Tensor& b = *in[1];
      require_rank2(op, a);
      require_same_shape(op, a, b);
      const std::size_t n = a.rows(), m = a.cols();
      std::vector<double> out(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const double d = a[i * m + j] - b[i * m + j];
          out[i] += d * d;
        }
      }
      return column(n, std::move(out));
    }
    case Op::kCrossEntropyWithLogits: {
      require_rank2(op, a);
      require_same_shape(op, a, attrs.target);
      const std::size_t n = a.rows(), m = a.cols();
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double peak = a[i * m];
        for (std::size_t j = 1; j < m; ++j) peak = std::max(peak, a[i * m + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) z += std::exp(a[i * m + j] - peak);
        const double log_z = peak + std::log(z);
        for (std::size_t j = 0; j < m; ++j) {
          total -= attrs.target[i * m + j] * (a[i * m + j] - log_z);
        }
      }
      return Tensor::scalar(total / static_cast<double>(n));
    }
    case Op::kCosineSimilarity: {
      const Tensor& b = *in[1];
      require_rank2(op, a);
      require_same_shape(op, a, b);
      const std::size_t n = a.rows(), m = a.cols();
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ra = a.row(i), rb = b.row(i);
        const double na = norm(ra), nb = norm(rb);
        if (na == 0.0 || nb == 0.0) throw NumericError("cosine-similarity: zero-norm row");
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += ra[j] * rb[j];
        out[i] = dot / (na * nb);
      }
      return column(n, std::move(out));
    }
    case Op::kLeaf:
      break;
  }
  throw std::logic_error("unhandled op");
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScalarMul: return "scalar-mul";
    case Op::kAddRow: return "add-row";
    case Op::kScaleRows: return "scale-rows";
    case Op::kConcatCols: return "concat-cols";
    case Op::kMean: return "mean";
    case Op::kSum: return "sum";
    case Op::kRowSum: return "row-sum";
    case Op::kLeakyRelu: return "leaky-relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSoftmaxRows: return "softmax";
    case Op::kLog: return "log";
    case Op::kSquare: return "square";
    case Op::kL2SquaredDistance: return "l2-squared-distance";
    case Op::kCrossEntropyWithLogits: return "cross-entropy-with-logits";
    case Op::kCosineSimilarity: return "cosine-similarity";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::parameter(const Tensor& param) {
  if (!param.all_finite()) throw NumericError("parameter contains non-finite values");
  Node node;
  node.value = param;
  node.value.clear_grad();
  node.requires_grad = true;
  node.param = &param;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant contains non-finite values");
  Node node;
  value.clear_grad();
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this tape");
  }
}

Var Tape::forward(Op op, std::span<const Var> inputs, OpAttrs attrs) {
  if (op == Op::kLeaf) throw std::invalid_argument("forward: leaf is not an operation");
  if (inputs.size() != arity(op)) {
    throw std::invalid_argument(std::string(op_name(op)) + ": expected " +
                                std::to_string(arity(op)) + " inputs, got " +
                                std::to_string(inputs.size()));
  }
  std::vector<const Tensor*> values;
  Node node;
  node.op = op;
  for (const Var& v : inputs) {
    check_owned(v);
    values.push_back(&nodes_[v.id].value);
    node.inputs.push_back(v.id);
    node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
  }
  if (op == Op::kCrossEntropyWithLogits && !attrs.target.all_finite()) {
    throw NumericError("cross-entropy-with-logits: non-finite target");
  }
  node.value = compute(op, values, attrs);
  if (!node.value.all_finite()) {
    throw NumericError(std::string(op_name(op)) + ": produced non-finite values");
  }
  node.attrs = std::move(attrs);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) {
    throw std::invalid_argument("backward: loss is not on this tape");
  }
  const Node& root = nodes_[loss.id];
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + to_string(root.value.shape()));
  }
  if (!root.requires_grad) return;

  std::vector<std::vector<double>> grads(loss.id + 1);
  grads[loss.id] = {1.0};
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (grads[id].empty() || !node.requires_grad) continue;
    if (node.op == Op::kLeaf) {
      if (node.param != nullptr) node.param->accumulate_grad(grads[id]);
      continue;
    }
    backward_node(node, grads[id], grads);
  }
}

void Tape::backward_node(const Node& node, const std::vector<double>& g,
                         std::vector<std::vector<double>>& grads) const {
  const auto slot = [&](std::size_t k) -> std::vector<double>* {
    const std::size_t id = node.inputs[k];
    if (!nodes_[id].requires_grad) return nullptr;
    if (grads[id].empty()) grads[id].assign(nodes_[id].value.size(), 0.0);
    return &grads[id];
  };
  const Tensor& a = nodes_[node.inputs[0]].value;
  const Tensor* b = node.inputs.size() > 1 ? &nodes_[node.inputs[1]].value : nullptr;
  const Tensor& y = node.value;

  switch (node.op) {
    case Op::kMatMul: {
      const std::size_t n = a.rows(), k = a.cols(), m = b->cols();
      if (auto* da = slot(0)) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * (*b)[p * m + j];
            (*da)[i * k + p] += s;
          }
      }
      if (auto* db = slot(1)) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            for (std::size_t j = 0; j < m; ++j) (*db)[p * m + j] += av * g[i * m + j];
          }
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = node.op == Op::kAdd ? 1.0 : -1.0;
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i];
      if (auto* db = slot(1))
        for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += sign * g[i];
      break;
    }
    case Op::kMul: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * (*b)[i];
      if (auto* db = slot(1))
        for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * a[i];
      break;
    }
    case Op::kDiv: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] / (*b)[i];
      if (auto* db = slot(1))
        for (std::size_t i = 0; i < g.size(); ++i)
          (*db)[i] -= g[i] * a[i] / ((*b)[i] * (*b)[i]);
      break;
    }
    case Op::kScalarMul: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += node.attrs.scalar * g[i];
      break;
    }
    case Op::kAddRow: {
      const std::size_t m = a.cols();
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i];
      if (auto* db = slot(1))
        for (std::size_t i = 0; i < g.size(); ++i) (*db)[i % m] += g[i];
      break;
    }
    case Op::kScaleRows: {
      const std::size_t m = a.cols();
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += (*b)[i / m] * g[i];
      if (auto* ds = slot(1))
        for (std::size_t i = 0; i < g.size(); ++i) (*ds)[i / m] += g[i] * a[i];
      break;
    }
    case Op::kConcatCols: {
      const std::size_t n = a.rows(), p = a.cols(), q = b->cols();
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < p; ++j) (*da)[i * p + j] += g[i * (p + q) + j];
      if (auto* db = slot(1))
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < q; ++j) (*db)[i * q + j] += g[i * (p + q) + p + j];
      break;
    }
    case Op::kMean:
    case Op::kSum: {
      const double scale = node.op == Op::kMean ? g[0] / static_cast<double>(a.size()) : g[0];
      if (auto* da = slot(0))
        for (double& v : *da) v += scale;
      break;
    }
    case Op::kRowSum: {
      const std::size_t m = a.cols();
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < da->size(); ++i) (*da)[i] += g[i / m];
      break;
    }
    case Op::kLeakyRelu: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i)
          (*da)[i] += g[i] * (a[i] > 0.0 ? 1.0 : node.attrs.scalar);
      break;
    }
    case Op::kSigmoid: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::kLog: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] / a[i];
      break;
    }
    case Op::kSquare: {
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += 2.0 * a[i] * g[i];
      break;
    }
    case Op::kSoftmaxRows: {
      const std::size_t n = a.rows(), m = a.cols();
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * y[i * m + j];
          for (std::size_t j = 0; j < m; ++j)
            (*da)[i * m + j] += y[i * m + j] * (g[i * m + j] - dot);
        }
      break;
    }
    case Op::kL2SquaredDistance: {
      const std::size_t m = a.cols();
      auto* da = slot(0);
      auto* db = slot(1);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = 2.0 * (a[i] - (*b)[i]) * g[i / m];
        if (da) (*da)[i] += d;
        if (db) (*db)[i] -= d;
      }
      break;
    }
    case Op::kCrossEntropyWithLogits: {
      const std::size_t n = a.rows(), m = a.cols();
      const Tensor& target = node.attrs.target;
      if (auto* da = slot(0))
        for (std::size_t i = 0; i < n; ++i) {
          double peak = a[i * m];
          for (std::size_t j = 1; j < m; ++j) peak = std::max(peak, a[i * m + j]);
          double z = 0.0, mass = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            z += std::exp(a[i * m + j] - peak);
            mass += target[i * m + j];
          }
          for (std::size_t j = 0; j < m; ++j) {
            const double p = std::exp(a[i * m + j] - peak) / z;
            (*da)[i * m + j] += g[0] * (p * mass - target[i * m + j]) / static_cast<double>(n);
          }
        }
      break;
    }
    case Op::kCosineSimilarity: {
      const std::size_t n = a.rows(), m = a.cols();
      auto* da = slot(0);
      auto* db = slot(1);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ra = a.row(i), rb = b->row(i);
        const double na = norm(ra), nb = norm(rb), c = y[i];
        for (std::size_t j = 0; j < m; ++j) {
          if (da) (*da)[i * m + j] += g[i] * (rb[j] / (na * nb) - c * ra[j] / (na * na));
          if (db) (*db)[i * m + j] += g[i] * (ra[j] / (na * nb) - c * rb[j] / (nb * nb));
        }
      }
      break;
    }
    case Op::kLeaf:
      break;
  }
}

namespace {

Var unary(Op op, Var a, OpAttrs attrs = {}) {
  const Var in[] = {a};
  return a.tape->forward(op, in, std::move(attrs));
}

Var binary(Op op, Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape->forward(op, in);
}

}  // namespace

Var matmul(Var a, Var b) { return binary(Op::kMatMul, a, b); }
Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }
Var div(Var a, Var b) { return binary(Op::kDiv, a, b); }
Var scale(Var a, double factor) { return unary(Op::kScalarMul, a, OpAttrs{factor, {}}); }
Var add_row(Var a, Var row) { return binary(Op::kAddRow, a, row); }
Var scale_rows(Var a, Var column) { return binary(Op::kScaleRows, a, column); }
Var concat_cols(Var a, Var b) { return binary(Op::kConcatCols, a, b); }
Var mean(Var a) { return unary(Op::kMean, a); }
Var sum(Var a) { return unary(Op::kSum, a); }
Var row_sum(Var a) { return unary(Op::kRowSum, a); }
Var leaky_relu(Var a, double slope) { return unary(Op::kLeakyRelu, a, OpAttrs{slope, {}}); }
Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Var softmax_rows(Var a) { return unary(Op::kSoftmaxRows, a); }
Var log(Var a) { return unary(Op::kLog, a); }
Var square(Var a) { return unary(Op::kSquare, a); }
Var l2_squared_distance(Var a, Var b) { return binary(Op::kL2SquaredDistance, a, b); }
Var cross_entropy_with_logits(Var logits, Tensor target) {
  return unary(Op::kCrossEntropyWithLogits, logits, OpAttrs{0.0, std::move(target)});
}
Var cosine_similarity(Var a, Var b) { return binary(Op::kCosineSimilarity, a, b); }

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  if (labels.empty()) throw ShapeError("one_hot: empty label list");
  Tensor out = Tensor::zeros({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw std::out_of_range("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

}  // namespace mkfusion
