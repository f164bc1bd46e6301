#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/cirn.hpp"
#include "ostr/config.hpp"
#include "ostr/error.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/model.hpp"
#include "ostr/objectives.hpp"
#include "ostr/rng.hpp"

using namespace ostr;
using ag::Tape;
using ag::VarId;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Independent per-row cross entropy: log-sum-exp minus the target logit.
double ce_oracle_row(const Tensor& logits, int row, int target) {
  const int cols = logits.shape()[1];
  double m = logits.at(row, 0);
  for (int c = 1; c < cols; ++c) m = std::max(m, logits.at(row, c));
  double acc = 0.0;
  for (int c = 0; c < cols; ++c) acc += std::exp(logits.at(row, c) - m);
  return m + std::log(acc) - logits.at(row, target);
}

LossTerm const_term(Tape& t, double v, int count = 1) {
  return {t.input(Tensor::full({1}, v), true), count};
}

double scalar(const Tape& t, const LossTerm& term) {
  return t.val(term.value).at(0);
}

}  // namespace

TEST_CASE("text loss is zero for confident correct predictions") {
  Tape t;
  Tensor logits = Tensor::zeros({3, 7});
  const std::vector<int> target = {2, 0, 6};
  for (int r = 0; r < 3; ++r) logits.at(r, target[r]) = 60.0;
  LossTerm lt = text_loss(t, t.input(logits, false), target);
  CHECK(lt.count == 3);
  CHECK(scalar(t, lt) >= 0.0);
  CHECK(scalar(t, lt) < 1e-15);
}

TEST_CASE("uniform logits cost ln(vocab) per token") {
  Tape t;
  LossTerm seven = text_loss(t, t.input(Tensor::zeros({3, 7}), false), {1, 5, 0});
  CHECK(scalar(t, seven) == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  LossTerm two = text_loss(t, t.input(Tensor::zeros({1, 2}), false), {0});
  CHECK(scalar(t, two) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("text loss matches a per-token softmax oracle") {
  Tape t;
  const Tensor logits = random_tensor({5, 11}, 301, -4.0, 4.0);
  const std::vector<int> target = {3, 10, 0, 7, 1};
  LossTerm lt = text_loss(t, t.input(logits, false), target);
  double want = 0.0;
  for (int r = 0; r < 5; ++r) want += ce_oracle_row(logits, r, target[r]);
  want /= 5.0;
  CHECK(scalar(t, lt) == doctest::Approx(want).epsilon(1e-10));
  CHECK(scalar(t, lt) >= 0.0);
}

TEST_CASE("padded tokens are excluded from the text average") {
  Tape t;
  const Tensor logits = random_tensor({4, 5}, 302, -3.0, 3.0);
  LossTerm lt = text_loss(t, t.input(logits, false), {1, 2, 4, 3}, 4);
  CHECK(lt.count == 3);
  const double want =
      (ce_oracle_row(logits, 0, 1) + ce_oracle_row(logits, 1, 2) +
       ce_oracle_row(logits, 3, 3)) /
      3.0;
  CHECK(scalar(t, lt) == doctest::Approx(want).epsilon(1e-10));

  CHECK_THROWS_AS(text_loss(t, t.input(logits, false), {4, 4, 4, 4}, 4),
                  std::invalid_argument);
}

TEST_CASE("text loss validates shapes") {
  Tape t;
  VarId logits = t.input(Tensor::zeros({3, 7}), false);
  CHECK_THROWS_AS(text_loss(t, logits, {1, 2}), std::invalid_argument);
  VarId vec = t.input(Tensor::zeros({7}), false);
  CHECK_THROWS_AS(text_loss(t, vec, {1, 2, 3, 4, 5, 6, 0}),
                  std::invalid_argument);
}

TEST_CASE("orientation loss covers perfect, uniform, and random batches") {
  Tape t;

  std::vector<VarId> perfect;
  Tensor h = Tensor::zeros({1, 2});
  h.at(0, 0) = 60.0;
  Tensor v = Tensor::zeros({1, 2});
  v.at(0, 1) = 60.0;
  perfect.push_back(t.input(h, false));
  perfect.push_back(t.input(v, false));
  LossTerm lp = orientation_loss(
      t, perfect, {Orientation::Horizontal, Orientation::Vertical});
  CHECK(lp.count == 2);
  CHECK(scalar(t, lp) < 1e-15);

  std::vector<VarId> even = {t.input(Tensor::full({1, 2}, 5.0), false)};
  LossTerm le = orientation_loss(t, even, {Orientation::Horizontal});
  CHECK(scalar(t, le) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<VarId> rows;
  std::vector<Orientation> targets;
  std::vector<Tensor> raw;
  double want = 0.0;
  for (int i = 0; i < 6; ++i) {
    raw.push_back(random_tensor({1, 2}, 400 + i, -2.0, 2.0));
    rows.push_back(t.input(raw.back(), false));
    targets.push_back(i % 2 ? Orientation::Vertical : Orientation::Horizontal);
    want += ce_oracle_row(raw.back(), 0, i % 2);
  }
  LossTerm lr = orientation_loss(t, rows, targets);
  CHECK(lr.count == 6);
  CHECK(scalar(t, lr) == doctest::Approx(want / 6.0).epsilon(1e-10));
  CHECK(scalar(t, lr) >= 0.0);

  CHECK_THROWS_AS(orientation_loss(t, rows, {Orientation::Horizontal}),
                  std::invalid_argument);

  LossTerm empty = orientation_loss(t, {}, {});
  CHECK(empty.count == 0);
  CHECK(scalar(t, empty) == 0.0);
}

TEST_CASE("content loss handles uniform and random batches") {
  Tape t;
  std::vector<VarId> uniform = {t.input(Tensor::zeros({1, 64}), false)};
  LossTerm lu = content_loss(t, uniform, {17});
  CHECK(scalar(t, lu) == doctest::Approx(std::log(64.0)).epsilon(1e-12));

  std::vector<VarId> rows;
  std::vector<int> targets = {4, 0, 8, 2};
  std::vector<Tensor> raw;
  double want = 0.0;
  for (int i = 0; i < 4; ++i) {
    raw.push_back(random_tensor({1, 9}, 500 + i, -3.0, 3.0));
    rows.push_back(t.input(raw.back(), false));
    want += ce_oracle_row(raw.back(), 0, targets[i]);
  }
  LossTerm lr = content_loss(t, rows, targets);
  CHECK(lr.count == 4);
  CHECK(scalar(t, lr) == doctest::Approx(want / 4.0).epsilon(1e-10));

  LossTerm empty = content_loss(t, {}, {});
  CHECK(empty.count == 0);
  CHECK(scalar(t, empty) == 0.0);
}

TEST_CASE("reconstruction loss averages pair and single items") {
  Tape t;
  const Tensor ta = random_tensor({32, 32}, 601, 0.0, 1.0);
  const Tensor tb = random_tensor({32, 32}, 602, 0.0, 1.0);
  const Tensor tc = random_tensor({32, 32}, 603, 0.0, 1.0);
  const Tensor td = random_tensor({32, 32}, 604, 0.0, 1.0);

  auto shifted = [](const Tensor& base, double off) {
    Tensor out = base;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += off;
    return out;
  };

  ReconstructionPair perfect;
  perfect.h_a = t.input(ta, false);
  perfect.v_a = t.input(tb, false);
  perfect.h_b = t.input(tc, false);
  perfect.v_b = t.input(td, false);
  perfect.target_h_a = ta;
  perfect.target_v_a = tb;
  perfect.target_h_b = tc;
  perfect.target_v_b = td;
  LossTerm lp = reconstruction_loss(t, {perfect});
  CHECK(lp.count == 1);
  CHECK(scalar(t, lp) == doctest::Approx(0.0).epsilon(1e-15));

  // One unit-offset reconstruction in the pair: item = (1+0+0+0)/2.
  ReconstructionPair off = perfect;
  off.h_a = t.input(shifted(ta, 1.0), false);
  LossTerm lo = reconstruction_loss(t, {off});
  CHECK(scalar(t, lo) == doctest::Approx(0.5).epsilon(1e-12));

  OwnReconstruction single;
  single.image = t.input(shifted(tb, 1.0), false);
  single.target = tb;
  LossTerm ls = reconstruction_loss(t, {}, {single});
  CHECK(ls.count == 1);
  CHECK(scalar(t, ls) == doctest::Approx(1.0).epsilon(1e-12));

  LossTerm mixed = reconstruction_loss(t, {off}, {single});
  CHECK(mixed.count == 2);
  CHECK(scalar(t, mixed) == doctest::Approx(0.75).epsilon(1e-12));

  LossTerm empty = reconstruction_loss(t, {});
  CHECK(empty.count == 0);
  CHECK(scalar(t, empty) == 0.0);

  ReconstructionPair broken = perfect;
  broken.v_b = -1;
  CHECK_THROWS_AS(reconstruction_loss(t, {broken}), std::invalid_argument);
}

TEST_CASE("reconstruction loss matches a per-pixel oracle") {
  Tape t;
  ReconstructionPair pair;
  Tensor imgs[4], tgts[4];
  for (int k = 0; k < 4; ++k) {
    imgs[k] = random_tensor({32, 32}, 700 + k, 0.0, 1.0);
    tgts[k] = random_tensor({32, 32}, 710 + k, 0.0, 1.0);
  }
  pair.h_a = t.input(imgs[0], false);
  pair.v_a = t.input(imgs[1], false);
  pair.h_b = t.input(imgs[2], false);
  pair.v_b = t.input(imgs[3], false);
  pair.target_h_a = tgts[0];
  pair.target_v_a = tgts[1];
  pair.target_h_b = tgts[2];
  pair.target_v_b = tgts[3];

  double want = 0.0;
  for (int k = 0; k < 4; ++k) {
    double mse = 0.0;
    for (std::int64_t i = 0; i < 1024; ++i) {
      const double d = imgs[k][i] - tgts[k][i];
      mse += d * d;
    }
    want += mse / 1024.0;
  }
  want /= 2.0;

  LossTerm lr = reconstruction_loss(t, {pair});
  CHECK(scalar(t, lr) == doctest::Approx(want).epsilon(1e-10));
  CHECK(scalar(t, lr) >= 0.0);
}

TEST_CASE("total loss combines terms with the configured weights") {
  Tape t;
  LossTerm lt = const_term(t, 1.0, 12);
  LossTerm lo = const_term(t, 2.0, 3);
  LossTerm lc = const_term(t, 3.0, 3);
  LossTerm lr = const_term(t, 4.0, 2);

  TotalLoss unit = total_loss(t, lt, lo, lc, lr, LossWeights{1.0, 1.0, 1.0});
  CHECK(unit.report.total == doctest::Approx(10.0).epsilon(1e-12));

  TotalLoss def = total_loss(t, lt, lo, lc, lr, LossWeights{});
  CHECK(def.report.total == doctest::Approx(26.0).epsilon(1e-12));
  CHECK(def.report.text == 1.0);
  CHECK(def.report.orient == 2.0);
  CHECK(def.report.content == 3.0);
  CHECK(def.report.recon == 4.0);
  CHECK(def.report.text_tokens == 12);
  CHECK(def.report.orient_count == 3);
  CHECK(def.report.content_count == 3);
  CHECK(def.report.recon_count == 2);
  CHECK(t.val(def.value).at(0) == def.report.total);
  const LossWeights w;
  CHECK(std::abs(def.report.total -
                 (def.report.text + w.alpha * def.report.orient +
                  w.beta * def.report.content + w.gamma * def.report.recon)) <=
        1e-12);

  TotalLoss zeros = total_loss(t, const_term(t, 0.0), const_term(t, 0.0),
                               const_term(t, 0.0), const_term(t, 0.0),
                               LossWeights{});
  CHECK(zeros.report.total == 0.0);

  // Skipped terms contribute nothing.
  TotalLoss text_only = total_loss(t, lt, {}, {}, {}, LossWeights{});
  CHECK(text_only.report.total == 1.0);
  CHECK(text_only.report.orient == 0.0);
  CHECK(text_only.report.orient_count == 0);

  LossWeights negative;
  negative.beta = -0.5;
  CHECK_THROWS_AS(total_loss(t, lt, lo, lc, lr, negative),
                  std::invalid_argument);

  LossTerm nan_term = const_term(t, std::nan(""));
  CHECK_THROWS_AS(total_loss(t, lt, lo, lc, nan_term, LossWeights{}),
                  TrainingDivergence);
}

TEST_CASE("gamma scales the reconstruction share linearly") {
  Tape t;
  LossTerm lt = const_term(t, 0.83, 4);
  LossTerm lo = const_term(t, 0.21, 2);
  LossTerm lc = const_term(t, 1.37, 2);
  LossTerm lr = const_term(t, 0.059, 1);
  TotalLoss g1 = total_loss(t, lt, lo, lc, lr, LossWeights{1.0, 1.0, 1.0});
  TotalLoss g2 = total_loss(t, lt, lo, lc, lr, LossWeights{1.0, 1.0, 2.0});
  CHECK(std::abs((g2.report.total - g1.report.total) - t.val(lr.value).at(0)) <=
        1e-12);
}

TEST_CASE("zero gamma silences reconstruction gradients") {
  CirnConfig cfg;
  cfg.c1 = 4;
  cfg.c2 = 4;
  cfg.num_classes = 5;
  ParamStore store;
  init_cirn_params(store, cfg, 3, 19);
  Charset cs = build_charset(cfg.num_classes, 23);

  auto run = [&](double gamma) {
    Tape t;
    TapeBind p(t, store);
    VarId fseq = t.input(random_tensor({6, 3}, 20), false);
    VarId abar = t.input(random_tensor({2, 6}, 21, 0.0, 1.0), false);
    CharacterBundle a =
        make_bundle(t, p, cfg, fseq, abar, 0, 1, Orientation::Horizontal);
    CharacterBundle b =
        make_bundle(t, p, cfg, fseq, abar, 1, 3, Orientation::Vertical);
    ReconstructionPair pair = exchange_and_reconstruct(t, p, cfg, cs, a, b);
    LossTerm lrec = reconstruction_loss(t, {pair});

    VarId logits = t.input(random_tensor({2, 6}, 22), true);
    LossTerm ltext = text_loss(t, logits, {1, 4});

    LossWeights w;
    w.gamma = gamma;
    TotalLoss tot = total_loss(t, ltext, {}, {}, lrec, w);
    t.backward(tot.value);

    double recon_grad_mass = 0.0;
    for (const auto& [name, id] : p.bound()) {
      if (name.rfind("cirn.recon.", 0) != 0) continue;
      const Tensor& g = t.grad_of(id);
      for (std::int64_t i = 0; i < g.numel(); ++i)
        recon_grad_mass += std::abs(g[i]);
    }
    const Tensor& tg = t.grad_of(logits);
    double text_grad_mass = 0.0;
    for (std::int64_t i = 0; i < tg.numel(); ++i)
      text_grad_mass += std::abs(tg[i]);
    return std::pair<double, double>(recon_grad_mass, text_grad_mass);
  };

  auto [recon_off, text_off] = run(0.0);
  CHECK(recon_off == 0.0);
  CHECK(text_off > 0.0);

  auto [recon_on, text_on] = run(5.0);
  CHECK(recon_on > 0.0);
  CHECK(text_on > 0.0);
}

TEST_CASE("loss weights come from configuration keys") {
  RunConfig cfg = RunConfig::defaults();
  LossWeights w = weights_from_config(cfg);
  CHECK(w.alpha == 1.0);
  CHECK(w.beta == 1.0);
  CHECK(w.gamma == 5.0);

  cfg.merge_line("loss.gamma=2.5");
  CHECK(weights_from_config(cfg).gamma == 2.5);
}
