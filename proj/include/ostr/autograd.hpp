#pragma once

// Minimal reverse-mode autodiff over Tensor. A Tape owns every node created
// during one forward pass; backward() walks nodes in reverse creation order,
// so gradient accumulation order is fixed and results are reproducible
// bit-for-bit. Gradients are allocated lazily: nodes never reached by the
// backward sweep keep an empty grad.

#include <functional>
#include <vector>

#include "ostr/tensor.hpp"

namespace ostr::ag {

using VarId = int;

enum class BnMode {
  TrainUpdate,  // batch statistics, running stats updated
  TrainFrozen,  // batch statistics, running stats untouched (gradient checks)
  Eval,         // running statistics
};

// Per-channel running statistics owned by the model, not the tape.
struct BnState {
  Tensor running_mean;
  Tensor running_var;

  explicit BnState(int channels = 0)
      : running_mean(Tensor::zeros({channels > 0 ? channels : 1})),
        running_var(Tensor::full({channels > 0 ? channels : 1}, 1.0)) {}
};

struct SoftmaxMask {
  bool causal = false;
  std::vector<unsigned char> allowed;  // per column; empty = all allowed
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  VarId input(Tensor value, bool requires_grad = true);
  VarId constant(Tensor value) { return input(std::move(value), false); }

  const Tensor& val(VarId id) const { return nodes_[id].value; }
  // Gradient of the last backward() target w.r.t. this node; empty tensor if
  // the node was never reached.
  const Tensor& grad_of(VarId id) const { return nodes_[id].grad; }

  void backward(VarId loss);

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- internal plumbing used by op builders ---
  bool wants(VarId id) const { return nodes_[id].requires_grad; }
  Tensor& grad_buf(VarId id);  // allocates zeros on first touch
  VarId emit(Tensor value, bool requires_grad, std::function<void()> back);
  // Attach the backward closure after the node exists (closures capture the
  // output id, which emit() only hands out afterwards).
  VarId emit_back(VarId id, std::function<void()> back) {
    nodes_[id].back = std::move(back);
    return id;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> back;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise / scalar
VarId add(Tape& t, VarId a, VarId b);
VarId sub(Tape& t, VarId a, VarId b);
VarId scale(Tape& t, VarId a, double s);
VarId relu(Tape& t, VarId a);
VarId logistic(Tape& t, VarId a);

// Linear algebra. Shapes after applying the transpose flags: a [m,k], b [k,n].
VarId matmul(Tape& t, VarId a, VarId b, bool ta = false, bool tb = false);
// y = x @ w + b broadcast over rows; x [R,C], w [C,D], b [D].
VarId affine_rows(Tape& t, VarId x, VarId w, VarId b);

// Structure
VarId reshape(Tape& t, VarId x, const std::vector<int>& shape);
VarId row_gather(Tape& t, VarId table, const std::vector<int>& ids);
VarId add_const(Tape& t, VarId x, const Tensor& c);  // same shape, no grad to c
VarId slice_row(Tape& t, VarId x, int row);          // [R,C] -> [C]
VarId col_block(Tape& t, VarId x, int offset, int len);  // [R,C] -> [R,len]
VarId concat_cols(Tape& t, const std::vector<VarId>& xs);
VarId concat_vecs(Tape& t, VarId a, VarId b);
// [N,C,H,W], sample n -> [H*W, C] with position p = h*W + w.
VarId chw_to_seq(Tape& t, VarId x, int n);

// Rowwise reductions / broadcasts over [R,C]
VarId sum_rows(Tape& t, VarId x);   // -> [C]
VarId mean_rows(Tape& t, VarId x);  // -> [C]
// y[p,c] = f[p,c] * a[p]; f [P,C], a [P].
VarId spatial_mul(Tape& t, VarId f, VarId a);

// Softmax over each row with optional causal / column masking; masked
// entries are exactly zero in the output.
VarId softmax_rows(Tape& t, VarId x, const SoftmaxMask& mask = {});

// Losses (scalars, shape [1])
VarId ce_rows_sum(Tape& t, VarId logits, const std::vector<int>& targets);
VarId mse_vs_const(Tape& t, VarId x, const Tensor& target);

// Conv stack. conv2d: x [N,CI,H,W], w [CO,CI,K,K], b [CO].
VarId conv2d(Tape& t, VarId x, VarId w, VarId b, int stride, int pad);
// Transposed conv, kernel 5 stride 2, exact spatial doubling; w [CI,CO,5,5].
VarId deconv2d_x2(Tape& t, VarId x, VarId w, VarId b);

// Batch normalization over [N,C,H,W] per channel, eps 1e-5, momentum 0.1.
VarId batchnorm(Tape& t, VarId x, VarId gamma, VarId beta, BnState& state,
                BnMode mode);
// Layer normalization over each row of [R,C], eps 1e-5.
VarId layernorm_rows(Tape& t, VarId x, VarId gamma, VarId beta);

}  // namespace ostr::ag
