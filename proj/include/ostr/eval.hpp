#pragma once

// Evaluation: text normalization rules, exact-match accuracy and normalized
// edit distance, the orientation/content similarity probe, and the benchmark
// table runner.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ostr/glyph_corpus.hpp"
#include "ostr/model.hpp"
#include "ostr/pipeline.hpp"

namespace ostr {

// Applied before comparing predictions with labels, stages in fixed order:
// width folding, script simplification, case folding, whitespace stripping.
// The fold maps are symbol -> symbol; unknown symbols pass through.
struct NormalizationRules {
  std::map<std::string, std::string> width_fold;
  std::map<std::string, std::string> simplify;
  bool case_fold = true;
  bool strip_whitespace = true;

  // Small built-in demonstration maps (full-width ASCII forms, a few
  // traditional -> simplified ideographs).
  static NormalizationRules standard();
  // UTF-8 TSV, one "from<TAB>to" per line; '#' comments skipped.
  static std::map<std::string, std::string> load_map(const std::string& path);
};

std::string normalize_text(const std::string& s, const NormalizationRules& rules);

// Levenshtein distance over Unicode code points, unit costs.
int edit_distance(const std::string& a, const std::string& b);

// Fraction of exact matches after normalization.
double compute_acc(const std::vector<std::string>& preds,
                   const std::vector<std::string>& labels,
                   const NormalizationRules& rules);

// 1 - mean(ED / maxlen); an empty-vs-empty pair contributes a zero term.
double compute_ned(const std::vector<std::string>& preds,
                   const std::vector<std::string>& labels,
                   const NormalizationRules& rules);

struct EvalResult {
  double acc = 0.0, ned = 0.0;
  double acc_h = 0.0, ned_h = 0.0;
  double acc_v = 0.0, ned_v = 0.0;
  int n = 0, n_h = 0, n_v = 0;
};

// Per-orientation breakdown over aligned prediction/label/orientation lists.
EvalResult evaluate_pairs(const std::vector<std::string>& preds,
                          const std::vector<std::string>& labels,
                          const std::vector<Orientation>& orients,
                          const NormalizationRules& rules);

// Greedy-decodes every manifest record and scores it.
EvalResult evaluate_model(ParamStore& store, const PipelineConfig& pipe,
                          const SymbolTable& symbols,
                          const DatasetManifest& manifest,
                          const NormalizationRules& rules);

enum class FeatureSource { RawFeatures, ContentVectors };

struct SimilarityReport {
  double so_mean = 0.0, so_std = 0.0;  // same orientation, different content
  double sc_mean = 0.0, sc_std = 0.0;  // same content, different orientation
  int pairs = 0;
  FeatureSource source = FeatureSource::RawFeatures;
};

// Renders num_pairs seeded line pairs per category with the generator (the
// same label can be drawn in both orientations) and compares either the
// flattened encoder features or the mean character content vector by cosine
// similarity.
SimilarityReport similarity_probe(ParamStore& store, const PipelineConfig& pipe,
                                  const Charset& charset, FeatureSource source,
                                  int num_pairs, std::uint64_t seed);

struct BenchmarkModel {
  std::string name;
  std::string checkpoint_path;
};

struct BenchmarkDataset {
  std::string name;
  std::string manifest_path;
};

// Emits the machine-readable score table: "# schema=ostr-bench-v1" header,
// then one "name=.. dataset=.. acc=.. ned=.. acc_h=.. ned_h=.. acc_v=..
// ned_v=.. n=.." line per (model, dataset). A model whose checkpoint cannot
// be loaded produces an error row and the run continues.
std::string run_benchmark(const std::vector<BenchmarkModel>& models,
                          const std::vector<BenchmarkDataset>& datasets,
                          const NormalizationRules& rules);

}  // namespace ostr
