#pragma once

// Reverse-mode automatic differentiation over dense double-precision
// matrices. The tape is define-by-run: ops append nodes in forward order
// and backward() replays them in reverse, which is always a valid
// topological order. Attention is provided as fused ops so graphs stay
// small; every backward rule is validated against finite differences in
// the test suite.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace eviscreen::ad {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<std::size_t> shape);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
};

class Tape {
public:
  using Var = int;

  /// Constant input; no gradient is tracked for it.
  Var constant(Tensor value);

  /// Learnable leaf: `value` is read during the forward pass and `grad`
  /// receives accumulated gradients on backward(). Both must outlive the
  /// tape and share the same shape.
  Var leaf(const Tensor* value, Tensor* grad);

  // [m,k] x [k,n] -> [m,n]
  Var matmul(Var a, Var b);
  // Elementwise sum of same-shape tensors.
  Var add(Var a, Var b);
  // [m,n] + row vector [1,n] broadcast over rows.
  Var add_rowvec(Var a, Var b);
  Var scale(Var a, double c);
  Var gelu(Var a);
  // Row-wise layer normalization with learnable gain/bias [1,n].
  Var layer_norm(Var x, Var gain, Var bias);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, std::size_t r0, std::size_t r1);
  Var concat_cols(Var a, Var b);

  /// Multi-head scaled dot-product self-attention over [T,dm] sequences:
  /// per head, softmax(Qh Kh^T / sqrt(dh)) Vh, heads concatenated.
  Var self_attend(Var q, Var k, Var v, int heads);

  /// Per-token evidence attention: token t attends over its own `slots`
  /// rows [t*slots, (t+1)*slots) of keys/values [T*slots, dm].
  Var evidence_attend(Var q, Var keys, Var values, int heads, int slots);

  /// Stable binary cross-entropy between logistic(logit) and label; logit
  /// is a [1,1] tensor.
  Var bce_with_logit(Var logit, double label);

  /// Mean of scalar [1,1] vars.
  Var mean_scalars(std::span<const Var> vars);

  const Tensor& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    return n.external ? *n.external : n.owned;
  }
  const Tensor& gradient(Var v) const;

  /// Seeds d(output)/d(output)=1 and sweeps the tape in reverse,
  /// accumulating into every leaf's grad tensor. `output` must be scalar.
  void backward(Var output);

private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;  // leaf: value lives outside the tape
    Tensor grad;
    Tensor* ext_grad = nullptr;  // leaf: accumulate here instead of `grad`
    bool needs_grad = false;
    std::function<void(Tape&, Var)> back;
    std::vector<double> saved;  // op-specific forward context
  };

  Tensor& grad_of(Var v);
  bool tracked(Var v) const { return nodes_[static_cast<std::size_t>(v)].needs_grad; }
  Var push(Tensor value, bool needs_grad, std::function<void(Tape&, Var)> back);

  std::vector<Node> nodes_;
};

/// Logistic function, shared by prediction and loss code.
double logistic(double z);

}  // namespace eviscreen::ad
