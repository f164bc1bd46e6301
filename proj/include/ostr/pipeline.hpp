#pragma once

// Glue between the model parts: one config bundle for the whole recognizer,
// sample preparation, the full training-graph forward pass, and greedy
// prediction. Training, evaluation, and the probes all go through here so
// every caller builds exactly the same graph.

#include <cstdint>
#include <string>
#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/cirn.hpp"
#include "ostr/config.hpp"
#include "ostr/decoder.hpp"
#include "ostr/encoder.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/image.hpp"
#include "ostr/model.hpp"
#include "ostr/objectives.hpp"
#include "ostr/preprocess.hpp"

namespace ostr {

struct PipelineConfig {
  EncoderConfig enc;
  DecoderConfig dec;  // num_classes mirrors the charset
  CirnConfig cirn;
  int canonical_height = 32;
  int canonical_width = 256;
  double aspect_threshold = 1.5;
  bool rotation_enabled = true;
  LossWeights weights;
  bool use_lo = true;
  bool use_lc = true;
  bool use_lr = true;

  // Rotation off = the vertical branch of the aspect test can never fire.
  double effective_threshold() const {
    return rotation_enabled ? aspect_threshold : 1e18;
  }
  bool wants_bundles() const { return use_lo || use_lc || reconstruction_active(); }
  bool reconstruction_active() const { return use_lr && weights.gamma > 0.0; }
};

// Reads every pipeline key (preprocess.*, encoder.*, decoder.*, cirn.*,
// loss.*, rotation.enabled) out of a flat config.
PipelineConfig pipeline_from_config(const RunConfig& cfg, int num_classes);

void validate_pipeline(const PipelineConfig& pipe);

void init_pipeline_params(ParamStore& store, const PipelineConfig& pipe,
                          std::uint64_t seed);

// One sample after preprocessing and label encoding.
struct PreparedSample {
  Tensor image;  // [canonical_height, canonical_width], values in [0, 1]
  int valid_width = 0;
  std::vector<int> classes;  // character class ids, EOS not included
  Orientation orientation = Orientation::Horizontal;
};

PreparedSample prepare_sample(const Image& img, std::vector<int> classes,
                              Orientation orient, const PipelineConfig& pipe);

// Loads and prepares every record of a manifest, in record order.
std::vector<PreparedSample> prepare_manifest(const DatasetManifest& manifest,
                                             const SymbolTable& symbols,
                                             const PipelineConfig& pipe);

// [N,1,H,W] stack of prepared images in batch order.
Tensor stack_images(const std::vector<const PreparedSample*>& batch);

struct BatchLosses {
  LossTerm text, orient, content, recon;
  TotalLoss total;
};

// Builds the whole training graph for one batch: encoder, teacher-forced
// decoder per sample, one character bundle per non-EOS step, orientation
// exchange between horizontal/vertical bundles (zipped in encounter order,
// leftovers reconstruct their own orientation), and the weighted loss.
BatchLosses batch_forward(ag::Tape& t, TapeBind& p, const PipelineConfig& pipe,
                          const Charset& charset,
                          const std::vector<const PreparedSample*>& batch,
                          ag::BnMode mode);

// Encoder in eval mode followed by greedy decoding; returns class ids.
std::vector<int> predict_ids(ParamStore& store, const PipelineConfig& pipe,
                             const PreparedSample& sample);

// Convenience wrapper: raw image in, transcription out.
std::string predict_text(ParamStore& store, const PipelineConfig& pipe,
                         const SymbolTable& symbols, const Image& img);

}  // namespace ostr
