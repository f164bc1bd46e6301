#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/encoder.hpp"
#include "ostr/model.hpp"
#include "ostr/rng.hpp"

using namespace ostr;
using ag::BnMode;
using ag::Tape;
using ag::VarId;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = 0.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double encoder_loss(ParamStore& store, const EncoderConfig& cfg,
                    const Tensor& image, const Tensor& target) {
  Tape t;
  TapeBind p(t, store);
  VarId img = t.input(image, false);
  VarId f = encode(t, p, cfg, img, BnMode::TrainFrozen);
  return t.val(ag::mse_vs_const(t, f, target))[0];
}

}  // namespace

TEST_CASE("encoder output obeys the /8 shape law") {
  EncoderConfig cfg{8};
  ParamStore store;
  init_encoder_params(store, cfg, 3);
  Tape t;
  TapeBind p(t, store, false);
  VarId img = t.input(random_tensor({2, 1, 32, 64}, 5), false);
  VarId f = encode(t, p, cfg, img, BnMode::Eval);
  CHECK(t.val(f).shape() == std::vector<int>{2, 32, 4, 8});

  Tape t2;
  TapeBind p2(t2, store, false);
  VarId img2 = t2.input(Tensor::zeros({1, 1, 32, 16}), false);
  VarId f2 = encode(t2, p2, cfg, img2, BnMode::Eval);
  CHECK(t2.val(f2).shape() == std::vector<int>{1, 32, 4, 2});
  for (std::int64_t i = 0; i < t2.val(f2).numel(); ++i)
    CHECK(std::isfinite(t2.val(f2)[i]));
}

TEST_CASE("encoder rejects malformed inputs") {
  EncoderConfig cfg{4};
  ParamStore store;
  init_encoder_params(store, cfg, 3);
  Tape t;
  TapeBind p(t, store, false);
  VarId two_ch = t.input(Tensor::zeros({1, 2, 32, 64}), false);
  CHECK_THROWS_AS(encode(t, p, cfg, two_ch, BnMode::Eval), std::invalid_argument);
  VarId odd = t.input(Tensor::zeros({1, 1, 30, 60}), false);
  CHECK_THROWS_AS(encode(t, p, cfg, odd, BnMode::Eval), std::invalid_argument);
}

TEST_CASE("encoder init is deterministic and name-keyed") {
  EncoderConfig cfg{8};
  ParamStore a, b, c;
  init_encoder_params(a, cfg, 3);
  init_encoder_params(b, cfg, 3);
  init_encoder_params(c, cfg, 4);
  REQUIRE(a.names() == b.names());
  bool all_equal = true, any_differ_across_seeds = false;
  for (const std::string& name : a.names()) {
    if (!bitwise_equal(a.get(name), b.get(name))) all_equal = false;
    if (!bitwise_equal(a.get(name), c.get(name))) any_differ_across_seeds = true;
  }
  CHECK(all_equal);
  CHECK(any_differ_across_seeds);
  // Stage-1 blocks keep the channel count, so no projection parameters.
  CHECK_FALSE(a.has("enc.s1.b0.proj.w"));
  CHECK(a.has("enc.s2.b0.proj.w"));
  CHECK(a.has("enc.s3.b0.proj.w"));
}

TEST_CASE("encoder forward is reproducible across tapes") {
  EncoderConfig cfg{4};
  ParamStore store;
  init_encoder_params(store, cfg, 11);
  Tensor image = random_tensor({1, 1, 32, 32}, 6);
  Tensor out1, out2;
  {
    Tape t;
    TapeBind p(t, store, false);
    out1 = t.val(encode(t, p, cfg, t.input(image, false), BnMode::Eval));
  }
  {
    Tape t;
    TapeBind p(t, store, false);
    out2 = t.val(encode(t, p, cfg, t.input(image, false), BnMode::Eval));
  }
  CHECK(bitwise_equal(out1, out2));
}

TEST_CASE("zeroed residual branches reduce stages to skip paths") {
  EncoderConfig cfg{4};
  ParamStore store;
  init_encoder_params(store, cfg, 9);
  for (const std::string& name : store.names()) {
    // Zero every residual branch (conv1/conv2 weights+biases and their norm
    // affine parameters); keep stems and projections.
    const bool branch = name.find(".conv1.") != std::string::npos ||
                        name.find(".conv2.") != std::string::npos;
    if (branch && name.substr(0, 4) == "enc.") store.get(name).fill(0.0);
  }

  Tensor image = random_tensor({1, 1, 16, 16}, 12);
  Tape t;
  TapeBind p(t, store, false);
  Tensor got = t.val(encode(t, p, cfg, t.input(image, false), BnMode::Eval));

  // Independent reconstruction: stem, then stage 1 is the identity (no
  // projection) and stages 2 and 3 collapse to their projection shortcuts.
  Tape r;
  TapeBind q(r, store, false);
  VarId x = r.input(image, false);
  VarId h = ag::conv2d(r, x, q["enc.stem.w"], q["enc.stem.b"], 2, 1);
  h = ag::batchnorm(r, h, q["enc.stem.bn.g"], q["enc.stem.bn.b"],
                    store.bn_state("enc.stem.bn"), BnMode::Eval);
  h = ag::relu(r, h);
  for (int stage = 2; stage <= 3; ++stage) {
    const std::string pr = "enc.s" + std::to_string(stage) + ".b0.proj";
    VarId pj = ag::conv2d(r, h, q[pr + ".w"], q[pr + ".b"], 2, 0);
    pj = ag::batchnorm(r, pj, q[pr + ".bn.g"], q[pr + ".bn.b"],
                       store.bn_state(pr + ".bn"), BnMode::Eval);
    h = ag::relu(r, pj);
    // The second block of each stage has no projection: with its branch
    // zeroed it is a plain identity on the (non-negative) activations.
  }
  CHECK(bitwise_equal(got, r.val(h)));
}

TEST_CASE("encoder end-to-end gradients match finite differences") {
  EncoderConfig cfg{2};
  ParamStore store;
  init_encoder_params(store, cfg, 21);
  Tensor image = random_tensor({1, 1, 8, 16}, 31);
  Tensor target = random_tensor({1, 8, 1, 2}, 32, -0.5, 0.5);

  Tape t;
  TapeBind p(t, store);
  VarId img = t.input(image, true);
  VarId f = encode(t, p, cfg, img, BnMode::TrainFrozen);
  REQUIRE(t.val(f).shape() == std::vector<int>{1, 8, 1, 2});
  VarId loss = ag::mse_vs_const(t, f, target);
  t.backward(loss);

  const double h = 1e-5;
  int checked = 0;
  for (const std::string& name : store.names()) {
    Tensor& w = store.get(name);
    const Tensor& g = t.grad_of(p.bound().at(name));
    const std::int64_t stride = std::max<std::int64_t>(1, w.numel() / 7);
    for (std::int64_t i = 0; i < w.numel(); i += stride) {
      const double keep = w[i];
      w[i] = keep + h;
      const double up = encoder_loss(store, cfg, image, target);
      w[i] = keep - h;
      const double dn = encoder_loss(store, cfg, image, target);
      w[i] = keep;
      const double num = (up - dn) / (2 * h);
      const double ana = g.empty() ? 0.0 : g[i];
      const double denom = std::max(std::abs(num), std::abs(ana));
      if (denom < 1e-7) continue;
      CHECK(std::abs(num - ana) / denom < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 50);

  // Input gradient as well.
  const Tensor& gi = t.grad_of(img);
  REQUIRE_FALSE(gi.empty());
  Tensor probe = image;
  for (std::int64_t i = 0; i < probe.numel(); i += 13) {
    const double keep = probe[i];
    probe[i] = keep + h;
    const double up = encoder_loss(store, cfg, probe, target);
    probe[i] = keep - h;
    const double dn = encoder_loss(store, cfg, probe, target);
    probe[i] = keep;
    const double num = (up - dn) / (2 * h);
    const double denom = std::max(std::abs(num), std::abs(gi[i]));
    if (denom < 1e-7) continue;
    CHECK(std::abs(num - gi[i]) / denom < 1e-4);
  }
}

TEST_CASE("zero upstream yields zero parameter gradients") {
  EncoderConfig cfg{2};
  ParamStore store;
  init_encoder_params(store, cfg, 2);
  Tape t;
  TapeBind p(t, store);
  VarId img = t.input(random_tensor({1, 1, 8, 8}, 1), true);
  VarId f = encode(t, p, cfg, img, BnMode::TrainFrozen);
  VarId loss = ag::scale(t, ag::mse_vs_const(t, f, Tensor::zeros({1, 8, 1, 1})),
                         0.0);
  t.backward(loss);
  for (const auto& [name, id] : p.bound()) {
    const Tensor& g = t.grad_of(id);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
  }
}
