#include "ostr/cirn.hpp"

#include <stdexcept>
#include <string>

namespace ostr {

namespace {

using ag::Tape;
using ag::VarId;

Tensor glyph_tensor(const Charset& charset, int class_id, bool rotated) {
  Image img = render_printed(charset, class_id, rotated);
  Tensor t({img.height, img.width});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = img.pixels[i];
  return t;
}

}  // namespace

std::vector<int> recon_channels(const CirnConfig& cfg) {
  const int fused = cfg.c1 + cfg.c2;
  std::vector<int> ch = {fused};
  for (int k = 1; k <= 4; ++k) ch.push_back(std::max(fused >> k, 1));
  ch.push_back(1);
  return ch;
}

void init_cirn_params(ParamStore& store, const CirnConfig& cfg,
                      int enc_channels, std::uint64_t seed) {
  if (cfg.c1 < 1 || cfg.c2 < 1 || cfg.num_classes < 1)
    throw std::invalid_argument("cirn config needs positive dims and classes");
  store.add_uniform("cirn.content.w", {enc_channels, cfg.c1}, enc_channels, seed);
  store.add_zeros("cirn.content.b", {cfg.c1});
  store.add_uniform("cirn.orient.w", {enc_channels, cfg.c2}, enc_channels, seed);
  store.add_zeros("cirn.orient.b", {cfg.c2});
  const std::vector<int> ch = recon_channels(cfg);
  for (int k = 0; k < 5; ++k) {
    const std::string prefix = "cirn.recon.d" + std::to_string(k);
    store.add_uniform(prefix + ".w", {ch[k], ch[k + 1], 5, 5}, ch[k] * 25, seed);
    store.add_zeros(prefix + ".b", {ch[k + 1]});
  }
  store.add_uniform("cirn.cls.w", {cfg.c1, cfg.num_classes}, cfg.c1, seed);
  store.add_zeros("cirn.cls.b", {cfg.num_classes});
  store.add_uniform("cirn.ori.w", {cfg.c2, 2}, cfg.c2, seed);
  store.add_zeros("cirn.ori.b", {2});
}

ag::VarId char_features(Tape& t, VarId fseq, VarId abar_row) {
  const Tensor& f = t.val(fseq);
  const Tensor& a = t.val(abar_row);
  if (f.ndim() != 2 || a.ndim() != 1 || a.dim(0) != f.dim(0))
    throw std::invalid_argument("attention row must match the feature grid");
  return ag::spatial_mul(t, fseq, abar_row);
}

std::pair<VarId, VarId> extract_content(Tape& t, TapeBind& p,
                                        const CirnConfig& cfg, VarId f_c) {
  (void)cfg;
  VarId map = ag::affine_rows(t, f_c, p["cirn.content.w"], p["cirn.content.b"]);
  return {map, ag::sum_rows(t, map)};
}

VarId extract_orientation(Tape& t, TapeBind& p, const CirnConfig& cfg,
                          VarId f_c) {
  (void)cfg;
  VarId map = ag::affine_rows(t, f_c, p["cirn.orient.w"], p["cirn.orient.b"]);
  return ag::mean_rows(t, map);
}

VarId fuse(Tape& t, VarId content_vec, VarId orient_vec) {
  return ag::concat_vecs(t, content_vec, orient_vec);
}

VarId reconstruct(Tape& t, TapeBind& p, const CirnConfig& cfg, VarId fused) {
  const std::vector<int> ch = recon_channels(cfg);
  if (t.val(fused).numel() != ch[0])
    throw std::invalid_argument("fused vector width does not match config");
  VarId x = ag::reshape(t, fused, {1, ch[0], 1, 1});
  for (int k = 0; k < 5; ++k) {
    const std::string prefix = "cirn.recon.d" + std::to_string(k);
    x = ag::deconv2d_x2(t, x, p[prefix + ".w"], p[prefix + ".b"]);
    if (k < 4) x = ag::relu(t, x);
  }
  return ag::reshape(t, ag::logistic(t, x), {32, 32});
}

CharacterBundle make_bundle(Tape& t, TapeBind& p, const CirnConfig& cfg,
                            VarId fseq, VarId abar, int step, int class_target,
                            Orientation orient_target) {
  CharacterBundle b;
  b.class_target = class_target;
  b.orient_target = orient_target;
  VarId arow = ag::slice_row(t, abar, step);
  b.f_c = char_features(t, fseq, arow);
  auto [map, vec] = extract_content(t, p, cfg, b.f_c);
  b.content_map = map;
  b.content_vec = vec;
  b.orient_vec = extract_orientation(t, p, cfg, b.f_c);
  return b;
}

ReconstructionPair exchange_and_reconstruct(Tape& t, TapeBind& p,
                                            const CirnConfig& cfg,
                                            const Charset& charset,
                                            const CharacterBundle& a,
                                            const CharacterBundle& b) {
  if (a.orient_target != Orientation::Horizontal ||
      b.orient_target != Orientation::Vertical)
    throw std::invalid_argument(
        "exchange needs a horizontal bundle first and a vertical bundle second");
  ReconstructionPair pair;
  pair.h_a = reconstruct(t, p, cfg, fuse(t, a.content_vec, a.orient_vec));
  pair.v_a = reconstruct(t, p, cfg, fuse(t, a.content_vec, b.orient_vec));
  pair.h_b = reconstruct(t, p, cfg, fuse(t, b.content_vec, a.orient_vec));
  pair.v_b = reconstruct(t, p, cfg, fuse(t, b.content_vec, b.orient_vec));
  pair.target_h_a = glyph_tensor(charset, a.class_target, false);
  pair.target_v_a = glyph_tensor(charset, a.class_target, true);
  pair.target_h_b = glyph_tensor(charset, b.class_target, false);
  pair.target_v_b = glyph_tensor(charset, b.class_target, true);
  return pair;
}

std::pair<VarId, Tensor> reconstruct_own(Tape& t, TapeBind& p,
                                         const CirnConfig& cfg,
                                         const Charset& charset,
                                         const CharacterBundle& bundle) {
  VarId img =
      reconstruct(t, p, cfg, fuse(t, bundle.content_vec, bundle.orient_vec));
  const bool rotated = bundle.orient_target == Orientation::Vertical;
  return {img, glyph_tensor(charset, bundle.class_target, rotated)};
}

std::pair<VarId, VarId> classify_heads(Tape& t, TapeBind& p,
                                       const CirnConfig& cfg,
                                       VarId content_vec, VarId orient_vec) {
  VarId c = ag::reshape(t, content_vec, {1, cfg.c1});
  VarId o = ag::reshape(t, orient_vec, {1, cfg.c2});
  VarId cls = ag::affine_rows(t, c, p["cirn.cls.w"], p["cirn.cls.b"]);
  VarId ori = ag::affine_rows(t, o, p["cirn.ori.w"], p["cirn.ori.b"]);
  return {cls, ori};
}

}  // namespace ostr
