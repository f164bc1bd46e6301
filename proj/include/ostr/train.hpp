#pragma once

// Optimization loop: orientation-mixed batch composition, AdaDelta with
// decoupled weight decay, divergence handling, best-validation retention,
// and the whole-model gradient checker.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ostr/checkpoint.hpp"
#include "ostr/config.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/model.hpp"
#include "ostr/objectives.hpp"
#include "ostr/pipeline.hpp"

namespace ostr {

struct TrainConfig {
  double learning_rate = 1.0;
  double rho = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 64;
  long long steps = 2000;
  int eval_every = 200;
  int min_vertical_per_batch = 2;
  std::uint64_t seed = 1;
  bool verbose = true;
};

TrainConfig train_config_from_config(const RunConfig& cfg);
void validate_train_config(const TrainConfig& cfg);

// Record indices for one step, drawn without replacement within each epoch.
// Every batch carries at least min_vertical samples of each orientation,
// dealt from per-orientation pools shuffled by the epoch seed (leftovers fill
// the remaining slots; the partial tail is skipped). When a dataset cannot
// honor the minimum it is lowered - to 0 for single-orientation data - with
// a warning on the first step.
std::vector<int> compose_batch(const DatasetManifest& manifest, int batch_size,
                               int min_vertical, std::uint64_t seed,
                               long long step);

// One AdaDelta update (decay rho, epsilon 1e-6) scaled by learning_rate,
// with decoupled weight decay lr*wd*param. Only parameters named in grads
// move; a NaN gradient aborts before any parameter changes.
void adadelta_step(ParamStore& params,
                   const std::map<std::string, Tensor>& grads, OptState& state,
                   const TrainConfig& cfg);

struct EvalPoint {
  long long step = 0;
  double acc = 0.0;
  double ned = 0.0;
};

struct TrainResult {
  Checkpoint best;  // best-validation snapshot; final state if never evaluated
  std::vector<LossReport> trace;  // one entry per completed step
  std::vector<EvalPoint> evals;
  long long best_step = -1;
  double best_acc = -1.0;
  double best_ned = -1.0;
  bool diverged = false;
  long long steps_run = 0;
};

// Full training run. config_echo is embedded into the checkpoint verbatim.
TrainResult train(const DatasetManifest& train_set,
                  const DatasetManifest& val_set, const Charset& charset,
                  const PipelineConfig& pipe, const TrainConfig& tcfg,
                  const std::string& config_echo = "");

// Finite-difference verification of the complete training graph at desk
// scale, term by term, plus dataflow checks that each loss only reaches the
// parameters it should.
struct GradCheckReport {
  struct TermResult {
    std::string term;
    double max_rel = 0.0;
    int checked = 0;
    std::string worst_param;
  };
  std::vector<TermResult> terms;               // total + each isolated term
  std::map<std::string, double> module_max;    // name prefix -> max rel error
  bool dataflow_ok = false;
  double tolerance = 1e-4;
  bool pass = false;
};

GradCheckReport global_grad_check(double tolerance = 1e-4,
                                  std::uint64_t seed = 1, bool verbose = false);

}  // namespace ostr
