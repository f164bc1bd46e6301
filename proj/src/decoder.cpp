#include "ostr/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace ostr {

namespace {

using ag::Tape;
using ag::VarId;

void init_linear(ParamStore& s, const std::string& prefix, int in_dim,
                 int out_dim, std::uint64_t seed) {
  s.add_uniform(prefix + ".w", {in_dim, out_dim}, in_dim, seed);
  s.add_zeros(prefix + ".b", {out_dim});
}

void init_ln(ParamStore& s, const std::string& prefix, int dim) {
  s.add_full(prefix + ".g", {dim}, 1.0);
  s.add_zeros(prefix + ".b", {dim});
}

void init_attention(ParamStore& s, const std::string& prefix, int dim,
                    std::uint64_t seed) {
  for (const char* part : {".q", ".k", ".v", ".o"})
    init_linear(s, prefix + part, dim, dim, seed);
}

VarId linear(Tape& t, TapeBind& p, const std::string& prefix, VarId x) {
  return ag::affine_rows(t, x, p[prefix + ".w"], p[prefix + ".b"]);
}

VarId layer_norm(Tape& t, TapeBind& p, const std::string& prefix, VarId x) {
  return ag::layernorm_rows(t, x, p[prefix + ".g"], p[prefix + ".b"]);
}

VarId attention(Tape& t, TapeBind& p, const std::string& prefix, VarId queries,
                VarId keys_values, const ag::SoftmaxMask& mask, int heads,
                int head_dim, std::vector<VarId>* alpha_out) {
  VarId q = linear(t, p, prefix + ".q", queries);
  VarId k = linear(t, p, prefix + ".k", keys_values);
  VarId v = linear(t, p, prefix + ".v", keys_values);
  std::vector<VarId> ctx;
  for (int h = 0; h < heads; ++h) {
    VarId qh = ag::col_block(t, q, h * head_dim, head_dim);
    VarId kh = ag::col_block(t, k, h * head_dim, head_dim);
    VarId vh = ag::col_block(t, v, h * head_dim, head_dim);
    VarId scores =
        ag::scale(t, ag::matmul(t, qh, kh, false, true), 1.0 / std::sqrt(head_dim));
    VarId alpha = ag::softmax_rows(t, scores, mask);
    if (alpha_out) alpha_out->push_back(alpha);
    ctx.push_back(ag::matmul(t, alpha, vh));
  }
  return linear(t, p, prefix + ".o", ag::concat_cols(t, ctx));
}

int argmax_row(const Tensor& m, int row) {
  int best = 0;
  for (int c = 1; c < m.dim(1); ++c)
    if (m.at(row, c) > m.at(row, best)) best = c;
  return best;
}

}  // namespace

Tensor sinusoidal_pe(int len, int dim) {
  Tensor pe({len, dim});
  for (int pos = 0; pos < len; ++pos) {
    for (int c = 0; c < dim; ++c) {
      const int pair = c / 2;
      const double angle =
          pos / std::pow(10000.0, (2.0 * pair) / static_cast<double>(dim));
      pe.at(pos, c) = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

void init_decoder_params(ParamStore& store, const DecoderConfig& cfg,
                         int enc_channels, std::uint64_t seed) {
  const int d = cfg.resolved_dim(enc_channels);
  const int ffn = cfg.resolved_ffn(enc_channels);
  if (cfg.num_classes < 1)
    throw std::invalid_argument("decoder needs at least one character class");
  if (d % cfg.num_heads != 0)
    throw std::invalid_argument("model_dim must be divisible by num_heads");
  store.add_uniform("dec.embed", {cfg.vocab(), d}, d, seed);
  init_linear(store, "dec.fproj", enc_channels, d, seed);
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string lp = "dec.l" + std::to_string(l);
    init_attention(store, lp + ".att", d, seed);
    init_ln(store, lp + ".ln1", d);
    init_attention(store, lp + ".cross", d, seed);
    init_ln(store, lp + ".ln2", d);
    init_linear(store, lp + ".ffn1", d, ffn, seed);
    init_linear(store, lp + ".ffn2", ffn, d, seed);
    init_ln(store, lp + ".ln3", d);
  }
  init_linear(store, "dec.head", d, cfg.vocab(), seed);
}

DecodeResult decode_teacher_forced(ag::Tape& t, TapeBind& p,
                                   const DecoderConfig& cfg, ag::VarId features,
                                   int n, const std::vector<int>& shifted_gt,
                                   int valid_width) {
  const Tensor& f = t.val(features);
  if (f.ndim() != 4) throw std::invalid_argument("features must be [N,C,H,W]");
  if (n < 0 || n >= f.dim(0))
    throw std::invalid_argument("feature sample index out of range");
  const int channels = f.dim(1);
  const int grid_h = f.dim(2);
  const int grid_w = f.dim(3);
  const int d = cfg.resolved_dim(channels);
  if (d % cfg.num_heads != 0)
    throw std::invalid_argument("model_dim must be divisible by num_heads");
  const int head_dim = d / cfg.num_heads;

  const int steps = static_cast<int>(shifted_gt.size());
  if (steps < 1 || steps > cfg.max_steps)
    throw std::invalid_argument("teacher-forced length must be in [1, max_steps]");
  if (shifted_gt[0] != cfg.bos())
    throw std::invalid_argument("shifted ground truth must start with BOS");
  for (int tok : shifted_gt)
    if (tok < 0 || tok >= cfg.vocab())
      throw std::invalid_argument("token id outside vocabulary");
  if (valid_width < 1 || valid_width > grid_w * 8)
    throw std::invalid_argument("valid_width outside the feature grid");

  const int positions = grid_h * grid_w;
  const int valid_cols = (valid_width + 7) / 8;

  VarId fseq = ag::chw_to_seq(t, features, n);  // [P, C]
  VarId src = linear(t, p, "dec.fproj", fseq);
  src = ag::add_const(t, src, sinusoidal_pe(positions, d));

  VarId x = ag::row_gather(t, p["dec.embed"], shifted_gt);
  x = ag::scale(t, x, std::sqrt(static_cast<double>(d)));
  x = ag::add_const(t, x, sinusoidal_pe(steps, d));

  ag::SoftmaxMask self_mask;
  self_mask.causal = true;
  ag::SoftmaxMask cross_mask;
  cross_mask.allowed.assign(positions, 0);
  for (int pos = 0; pos < positions; ++pos)
    cross_mask.allowed[pos] = pos % grid_w < valid_cols ? 1 : 0;

  DecodeResult out;
  out.grid_h = grid_h;
  out.grid_w = grid_w;
  out.fseq = fseq;
  out.trace.cross.resize(cfg.num_layers);

  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string lp = "dec.l" + std::to_string(l);
    VarId self_out = attention(t, p, lp + ".att", x, x, self_mask,
                               cfg.num_heads, head_dim, nullptr);
    x = layer_norm(t, p, lp + ".ln1", ag::add(t, x, self_out));

    std::vector<VarId> alphas;
    VarId cross_out = attention(t, p, lp + ".cross", x, src, cross_mask,
                                cfg.num_heads, head_dim, &alphas);
    for (VarId a : alphas) out.trace.cross[l].push_back(t.val(a));
    if (l == cfg.num_layers - 1) {
      VarId sum = alphas[0];
      for (int h = 1; h < cfg.num_heads; ++h) sum = ag::add(t, sum, alphas[h]);
      out.abar = ag::scale(t, sum, 1.0 / cfg.num_heads);
    }
    x = layer_norm(t, p, lp + ".ln2", ag::add(t, x, cross_out));

    VarId ffn_out =
        linear(t, p, lp + ".ffn2", ag::relu(t, linear(t, p, lp + ".ffn1", x)));
    x = layer_norm(t, p, lp + ".ln3", ag::add(t, x, ffn_out));
  }

  out.logits = linear(t, p, "dec.head", x);
  out.glimpse = ag::matmul(t, out.abar, fseq);
  out.trace.abar = t.val(out.abar);
  return out;
}

std::vector<int> greedy_decode(ParamStore& store, const DecoderConfig& cfg,
                               const Tensor& features, int n, int valid_width,
                               int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  std::vector<int> prefix = {cfg.bos()};
  std::vector<int> decoded;
  const int limit = std::min(max_steps, cfg.max_steps);
  for (int step = 0; step < limit; ++step) {
    ag::Tape t;
    TapeBind p(t, store, false);
    VarId f = t.input(features, false);
    DecodeResult r = decode_teacher_forced(t, p, cfg, f, n, prefix, valid_width);
    const int tok = argmax_row(t.val(r.logits), step);
    // EOS halts; BOS/PAD are never valid outputs, treat them as EOS too.
    if (tok >= cfg.num_classes) break;
    decoded.push_back(tok);
    prefix.push_back(tok);
  }
  return decoded;
}

}  // namespace ostr
