#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/model.hpp"

namespace ostr {

// Autoregressive transformer decoder over the flattened feature grid.
// Vocabulary = character classes plus EOS/BOS/PAD appended in that order.
struct DecoderConfig {
  int num_classes = 0;
  int num_heads = 4;
  int model_dim = 0;  // 0: use the encoder channel count
  int ffn_dim = 0;    // 0: 4 * model_dim
  int num_layers = 2;
  int max_steps = 14;

  int vocab() const { return num_classes + 3; }
  int eos() const { return num_classes; }
  int bos() const { return num_classes + 1; }
  int pad() const { return num_classes + 2; }
  int resolved_dim(int enc_channels) const {
    return model_dim > 0 ? model_dim : enc_channels;
  }
  int resolved_ffn(int enc_channels) const {
    return ffn_dim > 0 ? ffn_dim : 4 * resolved_dim(enc_channels);
  }
};

// Post-softmax cross-attention weights, recorded per layer and head, plus
// the head-mean of the final layer (the map handed to the reconstruction
// network).
struct AttentionTrace {
  std::vector<std::vector<Tensor>> cross;  // [layer][head] -> [T, P]
  Tensor abar;                             // [T, P]
};

struct DecodeResult {
  ag::VarId logits = -1;   // [T, vocab]
  ag::VarId abar = -1;     // [T, P], differentiable head-mean, final layer
  ag::VarId glimpse = -1;  // [T, C] = abar @ flattened raw features
  ag::VarId fseq = -1;     // [P, C] flattened raw features of this sample
  AttentionTrace trace;
  int grid_h = 0;
  int grid_w = 0;
};

// Sinusoidal positional encoding table, rows are positions.
Tensor sinusoidal_pe(int len, int dim);

void init_decoder_params(ParamStore& store, const DecoderConfig& cfg,
                         int enc_channels, std::uint64_t seed);

// features: [N,C,H',W']; sample n is decoded. shifted_gt must start with
// BOS and is consumed as-is (teacher forcing). Cross-attention masks the
// feature columns j with j >= ceil(valid_width / 8); self-attention is
// causal.
DecodeResult decode_teacher_forced(ag::Tape& t, TapeBind& p,
                                   const DecoderConfig& cfg, ag::VarId features,
                                   int n, const std::vector<int>& shifted_gt,
                                   int valid_width);

// Argmax decoding, halting at EOS or after max_steps tokens; the returned
// sequence carries class ids only (no BOS/EOS).
std::vector<int> greedy_decode(ParamStore& store, const DecoderConfig& cfg,
                               const Tensor& features, int n, int valid_width,
                               int max_steps);

}  // namespace ostr
