#include "ostr/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "ostr/kernels.hpp"

namespace ostr::ag {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

VarId Tape::input(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(VarId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

VarId Tape::emit(Tensor value, bool requires_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  VarId id = static_cast<VarId>(nodes_.size()) - 1;
  nodes_[id].back = std::move(back);
  return id;
}

void Tape::backward(VarId loss) {
  require(nodes_[loss].value.numel() == 1, "backward target must be scalar");
  grad_buf(loss)[0] = 1.0;
  for (VarId i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.empty()) n.back();
  }
}

// --------------------------------------------------------------------------
// elementwise
// --------------------------------------------------------------------------

VarId add(Tape& t, VarId a, VarId b) {
  require(t.val(a).same_shape(t.val(b)), "add: shape mismatch");
  Tensor y = t.val(a);
  const Tensor& vb = t.val(b);
  for (int i = 0; i < y.numel(); ++i) y[i] += vb[i];
  const bool rq = t.wants(a) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, b, out] {
      const Tensor& g = tp->grad_of(out);
      for (VarId src : {a, b}) {
        if (!tp->wants(src)) continue;
        Tensor& gs = tp->grad_buf(src);
        for (int i = 0; i < g.numel(); ++i) gs[i] += g[i];
      }
    });
  return out;
}

VarId sub(Tape& t, VarId a, VarId b) {
  require(t.val(a).same_shape(t.val(b)), "sub: shape mismatch");
  Tensor y = t.val(a);
  const Tensor& vb = t.val(b);
  for (int i = 0; i < y.numel(); ++i) y[i] -= vb[i];
  const bool rq = t.wants(a) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, b, out] {
      const Tensor& g = tp->grad_of(out);
      if (tp->wants(a)) {
        Tensor& ga = tp->grad_buf(a);
        for (int i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (tp->wants(b)) {
        Tensor& gb = tp->grad_buf(b);
        for (int i = 0; i < g.numel(); ++i) gb[i] -= g[i];
      }
    });
  return out;
}

VarId scale(Tape& t, VarId a, double s) {
  Tensor y = t.val(a);
  for (int i = 0; i < y.numel(); ++i) y[i] *= s;
  const bool rq = t.wants(a);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, s, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& ga = tp->grad_buf(a);
      for (int i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
    });
  return out;
}

VarId relu(Tape& t, VarId a) {
  Tensor y = t.val(a);
  for (int i = 0; i < y.numel(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  const bool rq = t.wants(a);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, out] {
      const Tensor& g = tp->grad_of(out);
      const Tensor& x = tp->val(a);
      Tensor& ga = tp->grad_buf(a);
      for (int i = 0; i < g.numel(); ++i)
        if (x[i] > 0.0) ga[i] += g[i];
    });
  return out;
}

VarId logistic(Tape& t, VarId a) {
  Tensor y = t.val(a);
  for (int i = 0; i < y.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
  const bool rq = t.wants(a);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, out] {
      const Tensor& g = tp->grad_of(out);
      const Tensor& yv = tp->val(out);
      Tensor& ga = tp->grad_buf(a);
      for (int i = 0; i < g.numel(); ++i) ga[i] += g[i] * yv[i] * (1.0 - yv[i]);
    });
  return out;
}

// --------------------------------------------------------------------------
// linear algebra
// --------------------------------------------------------------------------

VarId matmul(Tape& t, VarId a, VarId b, bool ta, bool tb) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  require(va.ndim() == 2 && vb.ndim() == 2, "matmul: rank-2 inputs required");
  const int m = ta ? va.dim(1) : va.dim(0);
  const int k = ta ? va.dim(0) : va.dim(1);
  const int kb = tb ? vb.dim(1) : vb.dim(0);
  const int n = tb ? vb.dim(0) : vb.dim(1);
  require(k == kb, "matmul: inner dimension mismatch");
  Tensor y({m, n});
  kernels::matmul(va.data(), vb.data(), y.data(), m, k, n, ta, tb, false);
  const bool rq = t.wants(a) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, b, ta, tb, m, k, n, out] {
      const Tensor& g = tp->grad_of(out);
      const Tensor& va = tp->val(a);
      const Tensor& vb = tp->val(b);
      if (tp->wants(a)) {
        Tensor& ga = tp->grad_buf(a);
        if (!ta && !tb)
          kernels::matmul(g.data(), vb.data(), ga.data(), m, n, k, false, true, true);
        else if (!ta && tb)
          kernels::matmul(g.data(), vb.data(), ga.data(), m, n, k, false, false, true);
        else if (ta && !tb)
          kernels::matmul(vb.data(), g.data(), ga.data(), k, n, m, false, true, true);
        else
          kernels::matmul(vb.data(), g.data(), ga.data(), k, n, m, true, true, true);
      }
      if (tp->wants(b)) {
        Tensor& gb = tp->grad_buf(b);
        if (!ta && !tb)
          kernels::matmul(va.data(), g.data(), gb.data(), k, m, n, true, false, true);
        else if (!ta && tb)
          kernels::matmul(g.data(), va.data(), gb.data(), n, m, k, true, false, true);
        else if (ta && !tb)
          kernels::matmul(va.data(), g.data(), gb.data(), k, m, n, false, false, true);
        else
          kernels::matmul(g.data(), va.data(), gb.data(), n, m, k, true, true, true);
      }
    });
  return out;
}

VarId affine_rows(Tape& t, VarId x, VarId w, VarId b) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  const Tensor& vb = t.val(b);
  require(vx.ndim() == 2 && vw.ndim() == 2 && vb.ndim() == 1,
          "affine_rows: bad ranks");
  const int r = vx.dim(0), c = vx.dim(1), d = vw.dim(1);
  require(vw.dim(0) == c && vb.dim(0) == d, "affine_rows: shape mismatch");
  Tensor y({r, d});
  kernels::matmul(vx.data(), vw.data(), y.data(), r, c, d, false, false, false);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) += vb[j];
  const bool rq = t.wants(x) || t.wants(w) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, w, b, r, c, d, out] {
      const Tensor& g = tp->grad_of(out);
      if (tp->wants(x)) {
        kernels::matmul(g.data(), tp->val(w).data(), tp->grad_buf(x).data(), r, d, c,
                        false, true, true);
      }
      if (tp->wants(w)) {
        kernels::matmul(tp->val(x).data(), g.data(), tp->grad_buf(w).data(), c, r, d,
                        true, false, true);
      }
      if (tp->wants(b)) {
        Tensor& gb = tp->grad_buf(b);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < d; ++j) gb[j] += g.at(i, j);
      }
    });
  return out;
}

// --------------------------------------------------------------------------
// structure
// --------------------------------------------------------------------------

VarId reshape(Tape& t, VarId x, const std::vector<int>& shape) {
  const Tensor& y = t.val(x);
  Tensor z(shape);
  require(z.numel() == y.numel(), "reshape: element count mismatch");
  for (int i = 0; i < z.numel(); ++i) z[i] = y[i];
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(z), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gx = tp->grad_buf(x);
      for (int i = 0; i < g.numel(); ++i) gx[i] += g[i];
    });
  return out;
}

VarId row_gather(Tape& t, VarId table, const std::vector<int>& ids) {
  const Tensor& vt = t.val(table);
  require(vt.ndim() == 2, "row_gather: table must be rank 2");
  const int rows = vt.dim(0), d = vt.dim(1);
  const int n = static_cast<int>(ids.size());
  for (int id : ids) require(id >= 0 && id < rows, "row_gather: id out of range");
  Tensor y({n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = vt.at(ids[i], j);
  const bool rq = t.wants(table);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, table, ids, n, d, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gt = tp->grad_buf(table);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gt.at(ids[i], j) += g.at(i, j);
    });
  return out;
}

VarId add_const(Tape& t, VarId x, const Tensor& c) {
  require(t.val(x).same_shape(c), "add_const: shape mismatch");
  Tensor y = t.val(x);
  for (int i = 0; i < y.numel(); ++i) y[i] += c[i];
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gx = tp->grad_buf(x);
      for (int i = 0; i < g.numel(); ++i) gx[i] += g[i];
    });
  return out;
}

VarId slice_row(Tape& t, VarId x, int row) {
  const Tensor& vx = t.val(x);
  require(vx.ndim() == 2 && row >= 0 && row < vx.dim(0), "slice_row: bad row");
  const int c = vx.dim(1);
  Tensor y({c});
  for (int j = 0; j < c; ++j) y[j] = vx.at(row, j);
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, row, c, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gx = tp->grad_buf(x);
      for (int j = 0; j < c; ++j) gx.at(row, j) += g[j];
    });
  return out;
}

VarId col_block(Tape& t, VarId x, int offset, int len) {
  const Tensor& vx = t.val(x);
  require(vx.ndim() == 2 && offset >= 0 && len > 0 && offset + len <= vx.dim(1),
          "col_block: bad slice");
  const int r = vx.dim(0);
  Tensor y({r, len});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < len; ++j) y.at(i, j) = vx.at(i, offset + j);
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, offset, len, r, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gx = tp->grad_buf(x);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < len; ++j) gx.at(i, offset + j) += g.at(i, j);
    });
  return out;
}

VarId concat_cols(Tape& t, const std::vector<VarId>& xs) {
  require(!xs.empty(), "concat_cols: empty input list");
  const int r = t.val(xs[0]).dim(0);
  int total = 0;
  for (VarId x : xs) {
    require(t.val(x).ndim() == 2 && t.val(x).dim(0) == r,
            "concat_cols: row mismatch");
    total += t.val(x).dim(1);
  }
  Tensor y({r, total});
  int off = 0;
  for (VarId x : xs) {
    const Tensor& vx = t.val(x);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < vx.dim(1); ++j) y.at(i, off + j) = vx.at(i, j);
    off += vx.dim(1);
  }
  bool rq = false;
  for (VarId x : xs) rq = rq || t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, xs, r, out] {
      const Tensor& g = tp->grad_of(out);
      int off = 0;
      for (VarId x : xs) {
        const int c = tp->val(x).dim(1);
        if (tp->wants(x)) {
          Tensor& gx = tp->grad_buf(x);
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gx.at(i, j) += g.at(i, off + j);
        }
        off += c;
      }
    });
  return out;
}

VarId concat_vecs(Tape& t, VarId a, VarId b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  require(va.ndim() == 1 && vb.ndim() == 1, "concat_vecs: rank-1 inputs required");
  const int la = va.dim(0), lb = vb.dim(0);
  Tensor y({la + lb});
  for (int i = 0; i < la; ++i) y[i] = va[i];
  for (int i = 0; i < lb; ++i) y[la + i] = vb[i];
  const bool rq = t.wants(a) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, a, b, la, lb, out] {
      const Tensor& g = tp->grad_of(out);
      if (tp->wants(a)) {
        Tensor& ga = tp->grad_buf(a);
        for (int i = 0; i < la; ++i) ga[i] += g[i];
      }
      if (tp->wants(b)) {
        Tensor& gb = tp->grad_buf(b);
        for (int i = 0; i < lb; ++i) gb[i] += g[la + i];
      }
    });
  return out;
}

VarId chw_to_seq(Tape& t, VarId x, int n) {
  const Tensor& vx = t.val(x);
  require(vx.ndim() == 4 && n >= 0 && n < vx.dim(0), "chw_to_seq: bad sample");
  const int c = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
  Tensor y({h * w, c});
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) y.at(i * w + j, ci) = vx.at(n, ci, i, j);
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, n, c, h, w, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gx = tp->grad_buf(x);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) gx.at(n, ci, i, j) += g.at(i * w + j, ci);
    });
  return out;
}

// --------------------------------------------------------------------------
// reductions / broadcast products
// --------------------------------------------------------------------------

VarId sum_rows(Tape& t, VarId x) {
  const Tensor& vx = t.val(x);
  require(vx.ndim() == 2, "sum_rows: rank-2 input required");
  const int r = vx.dim(0), c = vx.dim(1);
  Tensor y({c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) y[j] += vx.at(i, j);
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, r, c, out] {
      const Tensor& g = tp->grad_of(out);
      Tensor& gx = tp->grad_buf(x);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx.at(i, j) += g[j];
    });
  return out;
}

VarId mean_rows(Tape& t, VarId x) {
  const int r = t.val(x).dim(0);
  return scale(t, sum_rows(t, x), 1.0 / r);
}

VarId spatial_mul(Tape& t, VarId f, VarId a) {
  const Tensor& vf = t.val(f);
  const Tensor& va = t.val(a);
  require(vf.ndim() == 2 && va.ndim() == 1 && va.dim(0) == vf.dim(0),
          "spatial_mul: shape mismatch");
  const int p = vf.dim(0), c = vf.dim(1);
  Tensor y({p, c});
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < c; ++j) y.at(i, j) = vf.at(i, j) * va[i];
  const bool rq = t.wants(f) || t.wants(a);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, f, a, p, c, out] {
      const Tensor& g = tp->grad_of(out);
      const Tensor& vf = tp->val(f);
      const Tensor& va = tp->val(a);
      if (tp->wants(f)) {
        Tensor& gf = tp->grad_buf(f);
        for (int i = 0; i < p; ++i)
          for (int j = 0; j < c; ++j) gf.at(i, j) += g.at(i, j) * va[i];
      }
      if (tp->wants(a)) {
        Tensor& ga = tp->grad_buf(a);
        for (int i = 0; i < p; ++i) {
          double acc = 0.0;
          for (int j = 0; j < c; ++j) acc += g.at(i, j) * vf.at(i, j);
          ga[i] += acc;
        }
      }
    });
  return out;
}

// --------------------------------------------------------------------------
// softmax / losses
// --------------------------------------------------------------------------

VarId softmax_rows(Tape& t, VarId x, const SoftmaxMask& mask) {
  const Tensor& vx = t.val(x);
  require(vx.ndim() == 2, "softmax_rows: rank-2 input required");
  const int r = vx.dim(0), c = vx.dim(1);
  if (!mask.allowed.empty())
    require(static_cast<int>(mask.allowed.size()) == c,
            "softmax_rows: mask length mismatch");
  auto is_allowed = [&mask](int row, int col) {
    if (mask.causal && col > row) return false;
    if (!mask.allowed.empty() && !mask.allowed[col]) return false;
    return true;
  };
  Tensor y({r, c});
  for (int i = 0; i < r; ++i) {
    double m = -1e300;
    bool any = false;
    for (int j = 0; j < c; ++j)
      if (is_allowed(i, j)) {
        m = std::max(m, vx.at(i, j));
        any = true;
      }
    require(any, "softmax_rows: fully masked row");
    double s = 0.0;
    for (int j = 0; j < c; ++j)
      if (is_allowed(i, j)) {
        y.at(i, j) = std::exp(vx.at(i, j) - m);
        s += y.at(i, j);
      }
    for (int j = 0; j < c; ++j)
      if (is_allowed(i, j)) y.at(i, j) /= s;
  }
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, mask, r, c, out] {
      auto is_allowed = [&mask](int row, int col) {
        if (mask.causal && col > row) return false;
        if (!mask.allowed.empty() && !mask.allowed[col]) return false;
        return true;
      };
      const Tensor& g = tp->grad_of(out);
      const Tensor& yv = tp->val(out);
      Tensor& gx = tp->grad_buf(x);
      for (int i = 0; i < r; ++i) {
        double dot = 0.0;
        for (int j = 0; j < c; ++j)
          if (is_allowed(i, j)) dot += g.at(i, j) * yv.at(i, j);
        for (int j = 0; j < c; ++j)
          if (is_allowed(i, j)) gx.at(i, j) += yv.at(i, j) * (g.at(i, j) - dot);
      }
    });
  return out;
}

VarId ce_rows_sum(Tape& t, VarId logits, const std::vector<int>& targets) {
  const Tensor& vx = t.val(logits);
  require(vx.ndim() == 2, "ce_rows_sum: rank-2 logits required");
  const int r = vx.dim(0), c = vx.dim(1);
  require(static_cast<int>(targets.size()) == r, "ce_rows_sum: target count");
  for (int tg : targets) require(tg >= 0 && tg < c, "ce_rows_sum: target range");
  Tensor probs({r, c});
  double loss = 0.0;
  for (int i = 0; i < r; ++i) {
    double m = vx.at(i, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, vx.at(i, j));
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      probs.at(i, j) = std::exp(vx.at(i, j) - m);
      s += probs.at(i, j);
    }
    for (int j = 0; j < c; ++j) probs.at(i, j) /= s;
    loss += m + std::log(s) - vx.at(i, targets[i]);
  }
  Tensor y({1});
  y[0] = loss;
  const bool rq = t.wants(logits);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, logits, targets, probs, r, c, out] {
      const double g = tp->grad_of(out)[0];
      Tensor& gx = tp->grad_buf(logits);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          gx.at(i, j) += g * (probs.at(i, j) - (j == targets[i] ? 1.0 : 0.0));
    });
  return out;
}

VarId mse_vs_const(Tape& t, VarId x, const Tensor& target) {
  const Tensor& vx = t.val(x);
  require(vx.same_shape(target), "mse_vs_const: shape mismatch");
  const int n = vx.numel();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = vx[i] - target[i];
    acc += d * d;
  }
  Tensor y({1});
  y[0] = acc / n;
  const bool rq = t.wants(x);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, target, n, out] {
      const double g = tp->grad_of(out)[0];
      const Tensor& vx = tp->val(x);
      Tensor& gx = tp->grad_buf(x);
      for (int i = 0; i < n; ++i) gx[i] += g * 2.0 * (vx[i] - target[i]) / n;
    });
  return out;
}

// --------------------------------------------------------------------------
// convolution stack
// --------------------------------------------------------------------------

VarId conv2d(Tape& t, VarId x, VarId w, VarId b, int stride, int pad) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  const Tensor& vb = t.val(b);
  require(vx.ndim() == 4 && vw.ndim() == 4 && vb.ndim() == 1, "conv2d: bad ranks");
  require(vw.dim(1) == vx.dim(1) && vb.dim(0) == vw.dim(0) &&
              vw.dim(2) == vw.dim(3),
          "conv2d: shape mismatch");
  kernels::Conv2dDims d{vx.dim(0), vx.dim(1), vx.dim(2), vx.dim(3),
                        vw.dim(0), vw.dim(2), stride,    pad};
  require(d.out_h() > 0 && d.out_w() > 0, "conv2d: empty output");
  Tensor y({d.n, d.cout, d.out_h(), d.out_w()});
  kernels::conv2d_forward(vx.data(), vw.data(), vb.data(), y.data(), d);
  const bool rq = t.wants(x) || t.wants(w) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, w, b, d, out] {
      const Tensor& g = tp->grad_of(out);
      if (tp->wants(x))
        kernels::conv2d_grad_input(g.data(), tp->val(w).data(),
                                   tp->grad_buf(x).data(), d);
      if (tp->wants(w) || tp->wants(b)) {
        Tensor scratch_w, scratch_b;
        double* gw = tp->wants(w) ? tp->grad_buf(w).data() : nullptr;
        double* gb = tp->wants(b) ? tp->grad_buf(b).data() : nullptr;
        if (!gw) {
          scratch_w = Tensor::zeros(tp->val(w).shape());
          gw = scratch_w.data();
        }
        kernels::conv2d_grad_weight(tp->val(x).data(), g.data(), gw, gb, d);
      }
    });
  return out;
}

VarId deconv2d_x2(Tape& t, VarId x, VarId w, VarId b) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  const Tensor& vb = t.val(b);
  require(vx.ndim() == 4 && vw.ndim() == 4 && vb.ndim() == 1,
          "deconv2d_x2: bad ranks");
  require(vw.dim(0) == vx.dim(1) && vw.dim(2) == 5 && vw.dim(3) == 5 &&
              vb.dim(0) == vw.dim(1),
          "deconv2d_x2: shape mismatch");
  kernels::Deconv2dDims d{vx.dim(0), vx.dim(1), vx.dim(2), vx.dim(3), vw.dim(1)};
  Tensor y({d.n, d.cout, d.out_h(), d.out_w()});
  kernels::deconv2d_forward(vx.data(), vw.data(), vb.data(), y.data(), d);
  const bool rq = t.wants(x) || t.wants(w) || t.wants(b);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, w, b, d, out] {
      const Tensor& g = tp->grad_of(out);
      if (tp->wants(x))
        kernels::deconv2d_grad_input(g.data(), tp->val(w).data(),
                                     tp->grad_buf(x).data(), d);
      if (tp->wants(w) || tp->wants(b)) {
        Tensor scratch_w;
        double* gw = tp->wants(w) ? tp->grad_buf(w).data() : nullptr;
        double* gb = tp->wants(b) ? tp->grad_buf(b).data() : nullptr;
        if (!gw) {
          scratch_w = Tensor::zeros(tp->val(w).shape());
          gw = scratch_w.data();
        }
        kernels::deconv2d_grad_weight(tp->val(x).data(), g.data(), gw, gb, d);
      }
    });
  return out;
}

// --------------------------------------------------------------------------
// normalization
// --------------------------------------------------------------------------

VarId batchnorm(Tape& t, VarId x, VarId gamma, VarId beta, BnState& state,
                BnMode mode) {
  constexpr double kEps = 1e-5;
  constexpr double kMomentum = 0.1;
  const Tensor& vx = t.val(x);
  const Tensor& vg = t.val(gamma);
  const Tensor& vb = t.val(beta);
  require(vx.ndim() == 4, "batchnorm: rank-4 input required");
  const int n = vx.dim(0), c = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
  require(vg.ndim() == 1 && vg.dim(0) == c && vb.same_shape(vg),
          "batchnorm: parameter shape mismatch");
  require(state.running_mean.dim(0) == c && state.running_var.dim(0) == c,
          "batchnorm: state channel mismatch");
  const int per_channel = n * h * w;
  const bool batch_stats = mode != BnMode::Eval;

  Tensor mean({c}), invstd({c});
  for (int ci = 0; ci < c; ++ci) {
    double mu, var;
    if (batch_stats) {
      double s = 0.0;
      for (int ni = 0; ni < n; ++ni)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) s += vx.at(ni, ci, i, j);
      mu = s / per_channel;
      double sq = 0.0;
      for (int ni = 0; ni < n; ++ni)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            const double d = vx.at(ni, ci, i, j) - mu;
            sq += d * d;
          }
      var = sq / per_channel;
      if (mode == BnMode::TrainUpdate) {
        state.running_mean[ci] = (1.0 - kMomentum) * state.running_mean[ci] +
                                 kMomentum * mu;
        state.running_var[ci] =
            (1.0 - kMomentum) * state.running_var[ci] + kMomentum * var;
      }
    } else {
      mu = state.running_mean[ci];
      var = state.running_var[ci];
    }
    mean[ci] = mu;
    invstd[ci] = 1.0 / std::sqrt(var + kEps);
  }

  Tensor xhat({n, c, h, w});
  Tensor y({n, c, h, w});
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const double xh = (vx.at(ni, ci, i, j) - mean[ci]) * invstd[ci];
          xhat.at(ni, ci, i, j) = xh;
          y.at(ni, ci, i, j) = vg[ci] * xh + vb[ci];
        }

  const bool rq = t.wants(x) || t.wants(gamma) || t.wants(beta);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, gamma, beta, xhat, invstd, batch_stats, n, c,
                             h, w, per_channel, out] {
      const Tensor& g = tp->grad_of(out);
      const Tensor& vg = tp->val(gamma);
      for (int ci = 0; ci < c; ++ci) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int ni = 0; ni < n; ++ni)
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
              sum_g += g.at(ni, ci, i, j);
              sum_gx += g.at(ni, ci, i, j) * xhat.at(ni, ci, i, j);
            }
        if (tp->wants(gamma)) tp->grad_buf(gamma)[ci] += sum_gx;
        if (tp->wants(beta)) tp->grad_buf(beta)[ci] += sum_g;
        if (tp->wants(x)) {
          Tensor& gx = tp->grad_buf(x);
          const double k = vg[ci] * invstd[ci];
          if (batch_stats) {
            const double mg = sum_g / per_channel;
            const double mgx = sum_gx / per_channel;
            for (int ni = 0; ni < n; ++ni)
              for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                  gx.at(ni, ci, i, j) +=
                      k * (g.at(ni, ci, i, j) - mg -
                           xhat.at(ni, ci, i, j) * mgx);
          } else {
            for (int ni = 0; ni < n; ++ni)
              for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                  gx.at(ni, ci, i, j) += k * g.at(ni, ci, i, j);
          }
        }
      }
    });
  return out;
}

VarId layernorm_rows(Tape& t, VarId x, VarId gamma, VarId beta) {
  constexpr double kEps = 1e-5;
  const Tensor& vx = t.val(x);
  const Tensor& vg = t.val(gamma);
  const Tensor& vb = t.val(beta);
  require(vx.ndim() == 2, "layernorm_rows: rank-2 input required");
  const int r = vx.dim(0), c = vx.dim(1);
  require(vg.ndim() == 1 && vg.dim(0) == c && vb.same_shape(vg),
          "layernorm_rows: parameter shape mismatch");
  Tensor xhat({r, c});
  Tensor invstd({r});
  Tensor y({r, c});
  for (int i = 0; i < r; ++i) {
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += vx.at(i, j);
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = vx.at(i, j) - mu;
      var += d * d;
    }
    var /= c;
    invstd[i] = 1.0 / std::sqrt(var + kEps);
    for (int j = 0; j < c; ++j) {
      xhat.at(i, j) = (vx.at(i, j) - mu) * invstd[i];
      y.at(i, j) = vg[j] * xhat.at(i, j) + vb[j];
    }
  }
  const bool rq = t.wants(x) || t.wants(gamma) || t.wants(beta);
  Tape* tp = &t;
  VarId out = t.emit(std::move(y), rq, nullptr);
  if (rq)
    return t.emit_back(out, [tp, x, gamma, beta, xhat, invstd, r, c, out] {
      const Tensor& g = tp->grad_of(out);
      const Tensor& vg = tp->val(gamma);
      if (tp->wants(gamma)) {
        Tensor& gg = tp->grad_buf(gamma);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gg[j] += g.at(i, j) * xhat.at(i, j);
      }
      if (tp->wants(beta)) {
        Tensor& gb = tp->grad_buf(beta);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[j] += g.at(i, j);
      }
      if (tp->wants(x)) {
        Tensor& gx = tp->grad_buf(x);
        for (int i = 0; i < r; ++i) {
          double mg = 0.0, mgx = 0.0;
          for (int j = 0; j < c; ++j) {
            const double gj = g.at(i, j) * vg[j];
            mg += gj;
            mgx += gj * xhat.at(i, j);
          }
          mg /= c;
          mgx /= c;
          for (int j = 0; j < c; ++j)
            gx.at(i, j) += invstd[i] * (g.at(i, j) * vg[j] - mg -
                                        xhat.at(i, j) * mgx);
        }
      }
    });
  return out;
}

}  // namespace ostr::ag
