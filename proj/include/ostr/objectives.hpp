#pragma once

// Loss terms for the recognizer: token cross entropy on the transcription,
// per-character orientation and content classification, reconstruction MSE,
// and their weighted combination L = L_t + alpha*L_o + beta*L_c + gamma*L_r.

#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/cirn.hpp"
#include "ostr/config.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/tensor.hpp"

namespace ostr {

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 5.0;
};

LossWeights weights_from_config(const RunConfig& cfg);

// One loss term as a scalar tape node plus the number of items it averaged
// over. A default term (value -1, count 0) means the term was skipped.
struct LossTerm {
  ag::VarId value = -1;
  int count = 0;
};

// Scalar snapshots of each term and the weighted total.
struct LossReport {
  double text = 0.0, orient = 0.0, content = 0.0, recon = 0.0;
  double total = 0.0;
  int text_tokens = 0, orient_count = 0, content_count = 0, recon_count = 0;
};

// Mean token cross entropy of logits [T, V] against a length-T target id
// sequence (log-sum-exp stabilized). Rows whose target equals ignore_id are
// dropped from the average; pass -1 to keep every row.
LossTerm text_loss(ag::Tape& t, ag::VarId logits, const std::vector<int>& target,
                   int ignore_id = -1);

// Mean cross entropy over per-character orientation rows, each [1, 2] with
// class 0 = horizontal, class 1 = vertical. Empty input yields a constant
// zero with zero count.
LossTerm orientation_loss(ag::Tape& t, const std::vector<ag::VarId>& logits,
                          const std::vector<Orientation>& targets);

// Mean cross entropy over per-character class rows, each [1, K].
LossTerm content_loss(ag::Tape& t, const std::vector<ag::VarId>& logits,
                      const std::vector<int>& targets);

// A bundle that found no opposite-orientation partner reconstructs only its
// own orientation and contributes a single MSE.
struct OwnReconstruction {
  ag::VarId image = -1;
  Tensor target;
};

// Mean over contributing items: an exchanged pair's item is half the sum of
// its four MSEs (per-character horizontal plus vertical error), an unpaired
// bundle's item is its single MSE. Empty input yields zero with zero count.
LossTerm reconstruction_loss(ag::Tape& t,
                             const std::vector<ReconstructionPair>& pairs,
                             const std::vector<OwnReconstruction>& singles = {});

struct TotalLoss {
  ag::VarId value = -1;  // scalar on the tape; backward() from here
  LossReport report;
};

// L = L_t + alpha*L_o + beta*L_c + gamma*L_r over the present terms.
// Throws std::invalid_argument on negative weights and TrainingDivergence
// if any present term is NaN.
TotalLoss total_loss(ag::Tape& t, const LossTerm& text, const LossTerm& orient,
                     const LossTerm& content, const LossTerm& recon,
                     const LossWeights& w);

}  // namespace ostr
