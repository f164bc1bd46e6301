#include "ostr/pipeline.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace ostr {

PipelineConfig pipeline_from_config(const RunConfig& cfg, int num_classes) {
  PipelineConfig p;
  p.canonical_height = cfg.get_int("preprocess.canonical_height");
  p.canonical_width = cfg.get_int("preprocess.canonical_width");
  p.aspect_threshold = cfg.get_double("preprocess.vertical_aspect_threshold");
  p.rotation_enabled = cfg.get_bool("rotation.enabled");
  p.enc.base_channels = cfg.get_int("encoder.base_channels");
  p.dec.num_classes = num_classes;
  p.dec.num_heads = cfg.get_int("decoder.num_heads");
  p.dec.num_layers = cfg.get_int("decoder.num_layers");
  p.dec.model_dim = cfg.get_int("decoder.model_dim");
  p.dec.ffn_dim = cfg.get_int("decoder.ffn_dim");
  p.dec.max_steps = cfg.get_int("decoder.max_steps");
  p.cirn.c1 = cfg.get_int("cirn.c1");
  p.cirn.c2 = cfg.get_int("cirn.c2");
  p.cirn.num_classes = num_classes;
  p.weights = weights_from_config(cfg);
  p.use_lo = cfg.get_bool("loss.use_lo");
  p.use_lc = cfg.get_bool("loss.use_lc");
  p.use_lr = cfg.get_bool("loss.use_lr");
  validate_pipeline(p);
  return p;
}

void validate_pipeline(const PipelineConfig& pipe) {
  if (pipe.dec.num_classes < 2)
    throw std::invalid_argument("pipeline: need at least 2 classes");
  if (pipe.cirn.num_classes != pipe.dec.num_classes)
    throw std::invalid_argument("pipeline: class count mismatch");
  if (pipe.canonical_height <= 0 || pipe.canonical_height % 8 != 0 ||
      pipe.canonical_width <= 0 || pipe.canonical_width % 8 != 0)
    throw std::invalid_argument(
        "pipeline: canonical size must be a positive multiple of 8");
  if (pipe.aspect_threshold <= 0)
    throw std::invalid_argument("pipeline: aspect threshold must be > 0");
  if (pipe.dec.max_steps < 2)
    throw std::invalid_argument("pipeline: decoder needs max_steps >= 2");
  if (pipe.enc.base_channels < 1)
    throw std::invalid_argument("pipeline: base_channels must be >= 1");
}

void init_pipeline_params(ParamStore& store, const PipelineConfig& pipe,
                          std::uint64_t seed) {
  const int enc_c = encoder_out_channels(pipe.enc);
  init_encoder_params(store, pipe.enc, seed);
  init_decoder_params(store, pipe.dec, enc_c, seed);
  init_cirn_params(store, pipe.cirn, enc_c, seed);
}

static Tensor image_tensor(const Image& img) {
  Tensor out({img.height, img.width});
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out.at(r, c) = img.at(r, c);
  return out;
}

PreparedSample prepare_sample(const Image& img, std::vector<int> classes,
                              Orientation orient, const PipelineConfig& pipe) {
  PreparedSample out;
  PreprocessedSample pre =
      preprocess_sample(img, pipe.canonical_height, pipe.canonical_width,
                        pipe.effective_threshold());
  out.image = image_tensor(pre.image);
  out.valid_width = pre.valid_width;
  out.classes = std::move(classes);
  out.orientation = orient;
  for (int id : out.classes)
    if (id >= pipe.dec.num_classes)
      throw std::invalid_argument("prepare_sample: class id " +
                                  std::to_string(id) + " outside model range");
  if (static_cast<int>(out.classes.size()) + 1 > pipe.dec.max_steps)
    throw std::invalid_argument("prepare_sample: label longer than max_steps");
  return out;
}

std::vector<PreparedSample> prepare_manifest(const DatasetManifest& manifest,
                                             const SymbolTable& symbols,
                                             const PipelineConfig& pipe) {
  std::vector<PreparedSample> out;
  out.reserve(manifest.records.size());
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    TextLineSample s = load_sample(manifest, static_cast<int>(i), symbols);
    out.push_back(prepare_sample(s.image, s.label, s.orientation, pipe));
  }
  return out;
}

Tensor stack_images(const std::vector<const PreparedSample*>& batch) {
  if (batch.empty())
    throw std::invalid_argument("stack_images: empty batch");
  const int h = batch[0]->image.shape()[0];
  const int w = batch[0]->image.shape()[1];
  Tensor out({static_cast<int>(batch.size()), 1, h, w});
  for (size_t n = 0; n < batch.size(); ++n) {
    const Tensor& img = batch[n]->image;
    if (img.shape() != std::vector<int>{h, w})
      throw std::invalid_argument("stack_images: mixed image sizes");
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        out.at(static_cast<int>(n), 0, r, c) = img.at(r, c);
  }
  return out;
}

BatchLosses batch_forward(ag::Tape& t, TapeBind& p, const PipelineConfig& pipe,
                          const Charset& charset,
                          const std::vector<const PreparedSample*>& batch,
                          ag::BnMode mode) {
  if (batch.empty())
    throw std::invalid_argument("batch_forward: empty batch");
  const int bn = static_cast<int>(batch.size());

  const ag::VarId input = t.constant(stack_images(batch));
  const ag::VarId feat = encode(t, p, pipe.enc, input, mode);

  ag::VarId text_sum = -1;
  int token_count = 0;
  std::vector<CharacterBundle> horizontals, verticals;

  for (int n = 0; n < bn; ++n) {
    const PreparedSample& s = *batch[n];
    std::vector<int> shifted = {pipe.dec.bos()};
    shifted.insert(shifted.end(), s.classes.begin(), s.classes.end());
    std::vector<int> targets = s.classes;
    targets.push_back(pipe.dec.eos());

    DecodeResult dr = decode_teacher_forced(t, p, pipe.dec, feat, n, shifted,
                                            s.valid_width);
    LossTerm lt = text_loss(t, dr.logits, targets);
    text_sum = text_sum < 0 ? lt.value : ag::add(t, text_sum, lt.value);
    token_count += lt.count;

    if (pipe.wants_bundles()) {
      for (size_t step = 0; step < s.classes.size(); ++step) {
        CharacterBundle b =
            make_bundle(t, p, pipe.cirn, dr.fseq, dr.abar,
                        static_cast<int>(step), s.classes[step], s.orientation);
        (s.orientation == Orientation::Vertical ? verticals : horizontals)
            .push_back(b);
      }
    }
  }

  BatchLosses out;
  out.text = {ag::scale(t, text_sum, 1.0 / bn), token_count};

  if (pipe.use_lo || pipe.use_lc) {
    std::vector<ag::VarId> cls_rows, ori_rows;
    std::vector<int> cls_targets;
    std::vector<Orientation> ori_targets;
    for (const auto* side : {&horizontals, &verticals}) {
      for (const CharacterBundle& b : *side) {
        auto [cls, ori] =
            classify_heads(t, p, pipe.cirn, b.content_vec, b.orient_vec);
        cls_rows.push_back(cls);
        cls_targets.push_back(b.class_target);
        ori_rows.push_back(ori);
        ori_targets.push_back(b.orient_target);
      }
    }
    if (pipe.use_lo) out.orient = orientation_loss(t, ori_rows, ori_targets);
    if (pipe.use_lc) out.content = content_loss(t, cls_rows, cls_targets);
  }

  if (pipe.reconstruction_active() && !(horizontals.empty() && verticals.empty())) {
    std::vector<ReconstructionPair> pairs;
    std::vector<OwnReconstruction> singles;
    const size_t paired = std::min(horizontals.size(), verticals.size());
    for (size_t k = 0; k < paired; ++k)
      pairs.push_back(exchange_and_reconstruct(t, p, pipe.cirn, charset,
                                               horizontals[k], verticals[k]));
    for (const auto* side : {&horizontals, &verticals})
      for (size_t k = paired; k < side->size(); ++k) {
        auto [img, target] =
            reconstruct_own(t, p, pipe.cirn, charset, (*side)[k]);
        singles.push_back({img, target});
      }
    out.recon = reconstruction_loss(t, pairs, singles);
  }

  out.total = total_loss(t, out.text, out.orient, out.content, out.recon,
                         pipe.weights);
  return out;
}

std::vector<int> predict_ids(ParamStore& store, const PipelineConfig& pipe,
                             const PreparedSample& sample) {
  Tensor feats;
  {
    ag::Tape t;
    TapeBind p(t, store, /*requires_grad=*/false);
    const ag::VarId input = t.constant(stack_images({&sample}));
    const ag::VarId feat = encode(t, p, pipe.enc, input, ag::BnMode::Eval);
    feats = t.val(feat);
  }
  return greedy_decode(store, pipe.dec, feats, 0, sample.valid_width,
                       pipe.dec.max_steps);
}

std::string predict_text(ParamStore& store, const PipelineConfig& pipe,
                         const SymbolTable& symbols, const Image& img) {
  PreprocessedSample pre =
      preprocess_sample(img, pipe.canonical_height, pipe.canonical_width,
                        pipe.effective_threshold());
  PreparedSample sample;
  sample.image = image_tensor(pre.image);
  sample.valid_width = pre.valid_width;
  return symbols.encode(predict_ids(store, pipe, sample));
}

}  // namespace ostr
