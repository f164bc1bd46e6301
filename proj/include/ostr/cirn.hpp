#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/model.hpp"

namespace ostr {

// Character Image Reconstruction Network: attention-weighted character
// features are split into a content vector and an orientation vector; the
// two are re-fused (possibly after swapping orientations across a
// horizontal/vertical pair) and decoded back into a 32x32 printed glyph
// through five doubling transposed convolutions.
struct CirnConfig {
  int c1 = 64;  // content vector width
  int c2 = 64;  // orientation vector width
  int num_classes = 0;
};

// Transposed-convolution channel schedule, input to output: the fused width
// halves per layer down to a single output channel.
std::vector<int> recon_channels(const CirnConfig& cfg);

void init_cirn_params(ParamStore& store, const CirnConfig& cfg,
                      int enc_channels, std::uint64_t seed);

// One teacher-forced step's character evidence.
struct CharacterBundle {
  ag::VarId f_c = -1;          // [P, C] attention-weighted features
  ag::VarId content_map = -1;  // [P, c1]
  ag::VarId content_vec = -1;  // [c1]
  ag::VarId orient_vec = -1;   // [c2]
  int class_target = -1;
  Orientation orient_target = Orientation::Horizontal;
};

// F_c[p,:] = abar_row[p] * fseq[p,:].
ag::VarId char_features(ag::Tape& t, ag::VarId fseq, ag::VarId abar_row);

// 1x1 transform to c1 channels plus attention-pooled (summed) vector.
std::pair<ag::VarId, ag::VarId> extract_content(ag::Tape& t, TapeBind& p,
                                                const CirnConfig& cfg,
                                                ag::VarId f_c);

// 1x1 transform to c2 channels followed by global average pooling.
ag::VarId extract_orientation(ag::Tape& t, TapeBind& p, const CirnConfig& cfg,
                              ag::VarId f_c);

ag::VarId fuse(ag::Tape& t, ag::VarId content_vec, ag::VarId orient_vec);

// Fused vector -> 32x32 image in [0,1].
ag::VarId reconstruct(ag::Tape& t, TapeBind& p, const CirnConfig& cfg,
                      ag::VarId fused);

// Builds the bundle for one step from the flattened features and the
// aggregated attention map.
CharacterBundle make_bundle(ag::Tape& t, TapeBind& p, const CirnConfig& cfg,
                            ag::VarId fseq, ag::VarId abar, int step,
                            int class_target, Orientation orient_target);

struct ReconstructionPair {
  ag::VarId h_a = -1, v_a = -1, h_b = -1, v_b = -1;  // each [32,32]
  Tensor target_h_a, target_v_a, target_h_b, target_v_b;
};

// a must be horizontal, b vertical. Reconstructs both characters in both
// orientations by swapping orientation vectors; targets come from the
// printed glyphs (the vertical target is the anticlockwise rotation, the
// appearance of a character inside a rotated vertical line).
ReconstructionPair exchange_and_reconstruct(ag::Tape& t, TapeBind& p,
                                            const CirnConfig& cfg,
                                            const Charset& charset,
                                            const CharacterBundle& a,
                                            const CharacterBundle& b);

// Own-orientation reconstruction for bundles that found no partner.
std::pair<ag::VarId, Tensor> reconstruct_own(ag::Tape& t, TapeBind& p,
                                             const CirnConfig& cfg,
                                             const Charset& charset,
                                             const CharacterBundle& bundle);

// class logits [1, num_classes] from content only; orientation logits
// [1, 2] (Horizontal=0, Vertical=1) from orientation only.
std::pair<ag::VarId, ag::VarId> classify_heads(ag::Tape& t, TapeBind& p,
                                               const CirnConfig& cfg,
                                               ag::VarId content_vec,
                                               ag::VarId orient_vec);

}  // namespace ostr
