#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ostr/pipeline.hpp"

using namespace ostr;

namespace {

PipelineConfig small_pipe(int num_classes) {
  PipelineConfig p;
  p.enc.base_channels = 2;
  p.dec.num_classes = num_classes;
  p.dec.num_heads = 2;
  p.dec.model_dim = 8;
  p.dec.ffn_dim = 16;
  p.dec.num_layers = 1;
  p.dec.max_steps = 4;
  p.cirn.c1 = 4;
  p.cirn.c2 = 4;
  p.cirn.num_classes = num_classes;
  p.canonical_height = 32;
  p.canonical_width = 64;
  return p;
}

}  // namespace

TEST_CASE("pipeline settings come from the configuration") {
  RunConfig cfg = RunConfig::defaults();
  cfg.set("preprocess.canonical_width", "128");
  cfg.set("encoder.base_channels", "4");
  cfg.set("decoder.max_steps", "9");
  cfg.set("loss.gamma", "2.5");
  cfg.set("loss.use_lo", "0");
  cfg.set("rotation.enabled", "0");
  const PipelineConfig p = pipeline_from_config(cfg, 7);
  CHECK(p.canonical_width == 128);
  CHECK(p.canonical_height == 32);
  CHECK(p.enc.base_channels == 4);
  CHECK(p.dec.num_classes == 7);
  CHECK(p.cirn.num_classes == 7);
  CHECK(p.dec.max_steps == 9);
  CHECK(p.weights.gamma == 2.5);
  CHECK_FALSE(p.use_lo);
  CHECK(p.use_lc);
  CHECK_FALSE(p.rotation_enabled);
  CHECK(p.effective_threshold() > 1e17);
}

TEST_CASE("pipeline validation rejects broken settings") {
  auto broken = [](auto&& tweak) {
    PipelineConfig p = small_pipe(3);
    tweak(p);
    CHECK_THROWS_AS(validate_pipeline(p), std::invalid_argument);
  };
  validate_pipeline(small_pipe(3));
  broken([](PipelineConfig& p) { p.dec.num_classes = 1; p.cirn.num_classes = 1; });
  broken([](PipelineConfig& p) { p.cirn.num_classes = 5; });
  broken([](PipelineConfig& p) { p.canonical_height = 30; });
  broken([](PipelineConfig& p) { p.canonical_width = 0; });
  broken([](PipelineConfig& p) { p.aspect_threshold = 0.0; });
  broken([](PipelineConfig& p) { p.dec.max_steps = 1; });
  broken([](PipelineConfig& p) { p.enc.base_channels = 0; });
}

TEST_CASE("loss switches derive the graph shape flags") {
  PipelineConfig p = small_pipe(3);
  CHECK(p.wants_bundles());
  CHECK(p.reconstruction_active());
  p.weights.gamma = 0.0;
  CHECK_FALSE(p.reconstruction_active());
  CHECK(p.wants_bundles());  // classification heads still need bundles
  p.use_lo = p.use_lc = false;
  CHECK_FALSE(p.wants_bundles());
  p.weights.gamma = 5.0;
  p.use_lr = false;
  CHECK_FALSE(p.reconstruction_active());
  CHECK_FALSE(p.wants_bundles());
}

TEST_CASE("initialization registers every model part") {
  const PipelineConfig p = small_pipe(3);
  ParamStore store;
  init_pipeline_params(store, p, 4);
  bool enc = false, dec = false, cirn = false, recon = false;
  for (const std::string& name : store.names()) {
    enc = enc || name.rfind("enc.", 0) == 0;
    dec = dec || name.rfind("dec.", 0) == 0;
    cirn = cirn || name.rfind("cirn.", 0) == 0;
    recon = recon || name.rfind("cirn.recon.", 0) == 0;
  }
  CHECK(enc);
  CHECK(dec);
  CHECK(cirn);
  CHECK(recon);  // present even when a run never exercises it
  CHECK(store.total_elements() > 0);
}

TEST_CASE("sample preparation pads, rotates and validates") {
  const PipelineConfig p = small_pipe(3);
  const Charset cs = build_charset(3, 51);

  // Horizontal two-glyph line fills the canvas exactly.
  TextLineSample h2 = synth_text_line(cs, {0, 1}, Orientation::Horizontal,
                                      zero_noise(), 60);
  PreparedSample ph = prepare_sample(h2.image, h2.label, h2.orientation, p);
  CHECK(ph.image.shape() == std::vector<int>{32, 64});
  CHECK(ph.valid_width == 64);
  CHECK(ph.classes == std::vector<int>{0, 1});

  // A single glyph occupies half the canvas; the rest is zero padding.
  TextLineSample h1 = synth_text_line(cs, {2}, Orientation::Horizontal,
                                      zero_noise(), 61);
  PreparedSample p1 = prepare_sample(h1.image, h1.label, h1.orientation, p);
  CHECK(p1.valid_width == 32);
  double pad = 0.0, in_range = true;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 64; ++c) {
      const double v = p1.image.at(r, c);
      in_range = in_range && v >= 0.0 && v <= 1.0;
      if (c >= 32) pad += std::abs(v);
    }
  CHECK(in_range);
  CHECK(pad == 0.0);

  // A tall vertical line trips the aspect test and is rotated upright.
  TextLineSample v2 = synth_text_line(cs, {0, 2}, Orientation::Vertical,
                                      zero_noise(), 62);
  CHECK(v2.image.height == 64);
  CHECK(v2.image.width == 32);
  PreparedSample pv = prepare_sample(v2.image, v2.label, v2.orientation, p);
  CHECK(pv.valid_width == 64);

  // With rotation off the same line is shrunk instead.
  PipelineConfig norot = p;
  norot.rotation_enabled = false;
  PreparedSample ps = prepare_sample(v2.image, v2.label, v2.orientation, norot);
  CHECK(ps.valid_width == 16);

  // Labels the model cannot express are rejected.
  CHECK_THROWS_AS(prepare_sample(h1.image, {7}, h1.orientation, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(prepare_sample(h1.image, {0, 1, 2, 0}, h1.orientation, p),
                  std::invalid_argument);
}

TEST_CASE("image stacking keeps batch order and checks shapes") {
  const PipelineConfig p = small_pipe(3);
  const Charset cs = build_charset(3, 52);
  TextLineSample a = synth_text_line(cs, {0}, Orientation::Horizontal,
                                     zero_noise(), 70);
  TextLineSample b = synth_text_line(cs, {1, 2}, Orientation::Horizontal,
                                     zero_noise(), 71);
  PreparedSample pa = prepare_sample(a.image, a.label, a.orientation, p);
  PreparedSample pb = prepare_sample(b.image, b.label, b.orientation, p);

  const Tensor stack = stack_images({&pa, &pb});
  CHECK(stack.shape() == std::vector<int>{2, 1, 32, 64});
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 64; ++c) {
      CHECK(stack.at(0, 0, r, c) == pa.image.at(r, c));
      CHECK(stack.at(1, 0, r, c) == pb.image.at(r, c));
    }
  CHECK_THROWS_AS(stack_images({}), std::invalid_argument);
}

TEST_CASE("the batch graph wires every loss with the right counts") {
  const PipelineConfig p = small_pipe(3);
  const Charset cs = build_charset(3, 53);
  ParamStore store;
  init_pipeline_params(store, p, 8);

  TextLineSample h = synth_text_line(cs, {0}, Orientation::Horizontal,
                                     zero_noise(), 80);
  TextLineSample v = synth_text_line(cs, {1, 2}, Orientation::Vertical,
                                     zero_noise(), 81);
  PreparedSample ph = prepare_sample(h.image, h.label, h.orientation, p);
  PreparedSample pv = prepare_sample(v.image, v.label, v.orientation, p);
  const std::vector<const PreparedSample*> batch = {&ph, &pv};

  ag::Tape t;
  TapeBind bind(t, store);
  const BatchLosses losses = batch_forward(t, bind, p, cs, batch,
                                           ag::BnMode::Eval);
  // 1+2 characters plus one end marker per sample.
  CHECK(losses.text.count == 5);
  CHECK(losses.orient.count == 3);
  CHECK(losses.content.count == 3);
  // One exchanged pair plus one leftover vertical character.
  CHECK(losses.recon.count == 2);

  const LossReport& r = losses.total.report;
  CHECK(std::isfinite(r.total));
  CHECK(r.total > 0.0);
  CHECK(r.text_tokens == 5);
  CHECK(r.orient_count == 3);
  CHECK(r.content_count == 3);
  CHECK(r.recon_count == 2);
  CHECK(r.total == t.val(losses.total.value).at(0));

  // The whole graph is differentiable end to end.
  t.backward(losses.total.value);
  double grad_mag = 0.0;
  for (const auto& [name, id] : bind.bound()) {
    const Tensor& g = t.grad_of(id);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      CHECK(std::isfinite(g[i]));
      grad_mag += std::abs(g[i]);
    }
  }
  CHECK(grad_mag > 0.0);
}

TEST_CASE("loss switches prune the corresponding graph branches") {
  const Charset cs = build_charset(3, 54);
  TextLineSample h = synth_text_line(cs, {0}, Orientation::Horizontal,
                                     zero_noise(), 90);
  TextLineSample v = synth_text_line(cs, {1, 2}, Orientation::Vertical,
                                     zero_noise(), 91);

  auto run = [&](PipelineConfig p) {
    ParamStore store;
    init_pipeline_params(store, p, 8);
    PreparedSample ph = prepare_sample(h.image, h.label, h.orientation, p);
    PreparedSample pv = prepare_sample(v.image, v.label, v.orientation, p);
    ag::Tape t;
    TapeBind bind(t, store);
    return batch_forward(t, bind, p, cs, {&ph, &pv}, ag::BnMode::Eval).total.report;
  };

  PipelineConfig no_recon = small_pipe(3);
  no_recon.weights.gamma = 0.0;
  const LossReport a = run(no_recon);
  CHECK(a.recon_count == 0);
  CHECK(a.recon == 0.0);
  CHECK(a.orient_count == 3);

  PipelineConfig no_orient = small_pipe(3);
  no_orient.use_lo = false;
  const LossReport b = run(no_orient);
  CHECK(b.orient_count == 0);
  CHECK(b.orient == 0.0);
  CHECK(b.content_count == 3);
  CHECK(b.recon_count == 2);

  PipelineConfig text_only = small_pipe(3);
  text_only.use_lo = text_only.use_lc = text_only.use_lr = false;
  const LossReport c = run(text_only);
  CHECK(c.orient_count == 0);
  CHECK(c.content_count == 0);
  CHECK(c.recon_count == 0);
  CHECK(c.total == c.text);
}

TEST_CASE("batch forward is deterministic in eval mode") {
  const PipelineConfig p = small_pipe(3);
  const Charset cs = build_charset(3, 55);
  ParamStore store;
  init_pipeline_params(store, p, 8);
  TextLineSample h = synth_text_line(cs, {0, 1}, Orientation::Horizontal,
                                     zero_noise(), 92);
  PreparedSample ph = prepare_sample(h.image, h.label, h.orientation, p);

  auto total = [&]() {
    ag::Tape t;
    TapeBind bind(t, store);
    return batch_forward(t, bind, p, cs, {&ph}, ag::BnMode::Eval).total.report.total;
  };
  CHECK(total() == total());
}

TEST_CASE("greedy prediction yields valid class ids") {
  const PipelineConfig p = small_pipe(3);
  const Charset cs = build_charset(3, 56);
  const SymbolTable symbols = SymbolTable::for_classes(3);
  ParamStore store;
  init_pipeline_params(store, p, 8);

  TextLineSample h = synth_text_line(cs, {0, 1}, Orientation::Horizontal,
                                     zero_noise(), 93);
  PreparedSample ph = prepare_sample(h.image, h.label, h.orientation, p);
  const std::vector<int> ids = predict_ids(store, p, ph);
  CHECK(static_cast<int>(ids.size()) <= p.dec.max_steps - 1);
  for (int id : ids) {
    CHECK(id >= 0);
    CHECK(id < 3);
  }
  CHECK(predict_ids(store, p, ph) == ids);

  const std::string text = predict_text(store, p, symbols, h.image);
  CHECK(text == symbols.encode(ids));
}
