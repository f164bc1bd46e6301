#include "ostr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ostr/checkpoint.hpp"
#include "ostr/rng.hpp"
#include "ostr/text.hpp"

namespace ostr {

NormalizationRules NormalizationRules::standard() {
  NormalizationRules r;
  // Full-width ASCII block U+FF01..U+FF5E folds to U+0021..U+007E, plus the
  // ideographic space.
  for (std::uint32_t cp = 0xFF01; cp <= 0xFF5E; ++cp) {
    std::string from, to;
    utf8_append(from, cp);
    utf8_append(to, cp - 0xFEE0);
    r.width_fold[from] = to;
  }
  {
    std::string ideographic_space;
    utf8_append(ideographic_space, 0x3000);
    r.width_fold[ideographic_space] = " ";
  }
  // A handful of traditional -> simplified ideographs as a demonstration of
  // the script-simplification stage.
  const char* pairs[][2] = {{"\xE5\x9C\x8B", "\xE5\x9B\xBD"},   // 國 -> 国
                            {"\xE5\xAD\xB8", "\xE5\xAD\xA6"},   // 學 -> 学
                            {"\xE9\xBE\x8D", "\xE9\xBE\x99"},   // 龍 -> 龙
                            {"\xE9\xAB\x94", "\xE4\xBD\x93"},   // 體 -> 体
                            {"\xE6\x9B\xB8", "\xE4\xB9\xA6"}};  // 書 -> 书
  for (const auto& p : pairs) r.simplify[p[0]] = p[1];
  return r;
}

std::map<std::string, std::string> NormalizationRules::load_map(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open rule table " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::invalid_argument("rule table " + path + " line " +
                                  std::to_string(line_no) + ": missing tab");
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

namespace {

std::string apply_map(const std::string& s,
                      const std::map<std::string, std::string>& map) {
  if (map.empty()) return s;
  std::string out;
  for (std::uint32_t cp : utf8_decode(s)) {
    std::string sym;
    utf8_append(sym, cp);
    auto it = map.find(sym);
    out += (it == map.end()) ? sym : it->second;
  }
  return out;
}

bool is_space_cp(std::uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x3000;
}

}  // namespace

std::string normalize_text(const std::string& s,
                           const NormalizationRules& rules) {
  std::string cur = apply_map(s, rules.width_fold);
  cur = apply_map(cur, rules.simplify);
  std::string out;
  for (std::uint32_t cp : utf8_decode(cur)) {
    if (rules.strip_whitespace && is_space_cp(cp)) continue;
    if (rules.case_fold && cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
    utf8_append(out, cp);
  }
  return out;
}

int edit_distance(const std::string& a, const std::string& b) {
  const std::vector<std::uint32_t> x = utf8_decode(a);
  const std::vector<std::uint32_t> y = utf8_decode(b);
  const std::size_t n = x.size(), m = y.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument("metric inputs differ in length: " +
                                std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw std::invalid_argument("metric inputs are empty");
}

// acc and ned over a subset of pair indices; n == 0 leaves both at 0.
void score_subset(const std::vector<std::string>& preds,
                  const std::vector<std::string>& labels,
                  const std::vector<int>& idx, double* acc, double* ned) {
  *acc = 0.0;
  *ned = 0.0;
  if (idx.empty()) return;
  int hits = 0;
  double dist = 0.0;
  for (int i : idx) {
    const std::string& p = preds[i];
    const std::string& l = labels[i];
    if (p == l) ++hits;
    const std::size_t pl = utf8_decode(p).size();
    const std::size_t ll = utf8_decode(l).size();
    const std::size_t maxlen = std::max(pl, ll);
    if (maxlen > 0) dist += static_cast<double>(edit_distance(p, l)) / maxlen;
  }
  *acc = static_cast<double>(hits) / idx.size();
  *ned = 1.0 - dist / idx.size();
}

}  // namespace

double compute_acc(const std::vector<std::string>& preds,
                   const std::vector<std::string>& labels,
                   const NormalizationRules& rules) {
  check_lengths(preds.size(), labels.size());
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (normalize_text(preds[i], rules) == normalize_text(labels[i], rules))
      ++hits;
  return static_cast<double>(hits) / preds.size();
}

double compute_ned(const std::vector<std::string>& preds,
                   const std::vector<std::string>& labels,
                   const NormalizationRules& rules) {
  check_lengths(preds.size(), labels.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string p = normalize_text(preds[i], rules);
    const std::string l = normalize_text(labels[i], rules);
    const std::size_t maxlen =
        std::max(utf8_decode(p).size(), utf8_decode(l).size());
    if (maxlen > 0) dist += static_cast<double>(edit_distance(p, l)) / maxlen;
  }
  return 1.0 - dist / preds.size();
}

EvalResult evaluate_pairs(const std::vector<std::string>& preds,
                          const std::vector<std::string>& labels,
                          const std::vector<Orientation>& orients,
                          const NormalizationRules& rules) {
  check_lengths(preds.size(), labels.size());
  check_lengths(preds.size(), orients.size());

  std::vector<std::string> np(preds.size()), nl(labels.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    np[i] = normalize_text(preds[i], rules);
    nl[i] = normalize_text(labels[i], rules);
  }

  EvalResult r;
  std::vector<int> all, hs, vs;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    all.push_back(static_cast<int>(i));
    (orients[i] == Orientation::Vertical ? vs : hs)
        .push_back(static_cast<int>(i));
  }
  score_subset(np, nl, all, &r.acc, &r.ned);
  score_subset(np, nl, hs, &r.acc_h, &r.ned_h);
  score_subset(np, nl, vs, &r.acc_v, &r.ned_v);
  r.n = static_cast<int>(all.size());
  r.n_h = static_cast<int>(hs.size());
  r.n_v = static_cast<int>(vs.size());
  return r;
}

EvalResult evaluate_model(ParamStore& store, const PipelineConfig& pipe,
                          const SymbolTable& symbols,
                          const DatasetManifest& manifest,
                          const NormalizationRules& rules) {
  std::vector<std::string> preds, labels;
  std::vector<Orientation> orients;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    TextLineSample s = load_sample(manifest, static_cast<int>(i), symbols);
    PreparedSample prep = prepare_sample(s.image, s.label, s.orientation, pipe);
    preds.push_back(symbols.encode(predict_ids(store, pipe, prep)));
    labels.push_back(manifest.records[i].label);
    orients.push_back(s.orientation);
  }
  return evaluate_pairs(preds, labels, orients, rules);
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Flattened encoder features or the mean character content vector for one
// synthesized line.
std::vector<double> probe_features(ParamStore& store,
                                   const PipelineConfig& pipe,
                                   const TextLineSample& sample,
                                   FeatureSource source) {
  PreparedSample prep =
      prepare_sample(sample.image, sample.label, sample.orientation, pipe);

  ag::Tape t;
  TapeBind p(t, store, /*requires_grad=*/false);
  const ag::VarId input = t.constant(stack_images({&prep}));
  const ag::VarId feat = encode(t, p, pipe.enc, input, ag::BnMode::Eval);

  std::vector<double> out;
  if (source == FeatureSource::RawFeatures) {
    const Tensor f = t.val(feat);
    out.assign(f.data(), f.data() + f.numel());
    return out;
  }

  std::vector<int> shifted = {pipe.dec.bos()};
  shifted.insert(shifted.end(), prep.classes.begin(), prep.classes.end());
  DecodeResult dr = decode_teacher_forced(t, p, pipe.dec, feat, 0, shifted,
                                          prep.valid_width);
  const int c1 = pipe.cirn.c1;
  out.assign(c1, 0.0);
  for (std::size_t step = 0; step < prep.classes.size(); ++step) {
    CharacterBundle b = make_bundle(t, p, pipe.cirn, dr.fseq, dr.abar,
                                    static_cast<int>(step),
                                    prep.classes[step], prep.orientation);
    const Tensor v = t.val(b.content_vec);
    for (int i = 0; i < c1; ++i) out[i] += v[i];
  }
  for (int i = 0; i < c1; ++i) out[i] /= static_cast<double>(prep.classes.size());
  return out;
}

struct Stats {
  double mean = 0.0, stdev = 0.0;
};

Stats mean_std(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stdev = std::sqrt(var / xs.size());
  return s;
}

}  // namespace

SimilarityReport similarity_probe(ParamStore& store, const PipelineConfig& pipe,
                                  const Charset& charset, FeatureSource source,
                                  int num_pairs, std::uint64_t seed) {
  if (num_pairs < 1)
    throw std::invalid_argument("similarity_probe: need at least one pair");
  if (charset.num_classes < 2)
    throw std::invalid_argument(
        "similarity_probe: need two classes for different-content pairs");

  Rng rng(mix_seed(seed, hash_str("probe")));
  const NoiseConfig clean = zero_noise();

  auto draw_label = [&](int len) {
    std::vector<int> label(len);
    for (int& c : label) c = rng.uniform_int(0, charset.num_classes - 1);
    return label;
  };

  std::vector<double> so, sc;
  for (int i = 0; i < num_pairs; ++i) {
    const int len = rng.uniform_int(2, 4);

    // Same content, opposite orientations.
    const std::vector<int> shared = draw_label(len);
    TextLineSample h = synth_text_line(charset, shared, Orientation::Horizontal,
                                       clean, mix_seed(seed, 2 * i));
    TextLineSample v = synth_text_line(charset, shared, Orientation::Vertical,
                                       clean, mix_seed(seed, 2 * i + 1));
    sc.push_back(cosine(probe_features(store, pipe, h, source),
                        probe_features(store, pipe, v, source)));

    // Same orientation, different content; alternate the orientation.
    const Orientation both =
        (i % 2 == 0) ? Orientation::Horizontal : Orientation::Vertical;
    const std::vector<int> la = draw_label(len);
    std::vector<int> lb = draw_label(len);
    while (lb == la) lb = draw_label(len);
    TextLineSample a =
        synth_text_line(charset, la, both, clean, mix_seed(seed, 1000003 + 2 * i));
    TextLineSample b = synth_text_line(charset, lb, both, clean,
                                       mix_seed(seed, 1000003 + 2 * i + 1));
    so.push_back(cosine(probe_features(store, pipe, a, source),
                        probe_features(store, pipe, b, source)));
  }

  SimilarityReport rep;
  rep.source = source;
  rep.pairs = num_pairs;
  const Stats sso = mean_std(so), ssc = mean_std(sc);
  rep.so_mean = sso.mean;
  rep.so_std = sso.stdev;
  rep.sc_mean = ssc.mean;
  rep.sc_std = ssc.stdev;
  return rep;
}

std::string run_benchmark(const std::vector<BenchmarkModel>& models,
                          const std::vector<BenchmarkDataset>& datasets,
                          const NormalizationRules& rules) {
  std::string report = "# schema=ostr-bench-v1\n";
  char line[512];

  for (const BenchmarkModel& model : models) {
    Checkpoint ck;
    ParamStore* store = nullptr;
    PipelineConfig pipe;
    SymbolTable symbols;
    std::string load_error;
    try {
      ck = load_checkpoint(model.checkpoint_path);
      const RunConfig cfg = RunConfig::parse(ck.config_text);
      const int num_classes = cfg.get_int("model.num_classes");
      pipe = pipeline_from_config(cfg, num_classes);
      symbols = SymbolTable::for_classes(num_classes);
      store = &ck.params;
    } catch (const std::exception& e) {
      load_error = e.what();
    }

    for (const BenchmarkDataset& ds : datasets) {
      if (!load_error.empty()) {
        std::snprintf(line, sizeof(line), "name=%s dataset=%s error=%s\n",
                      model.name.c_str(), ds.name.c_str(), load_error.c_str());
        report += line;
        continue;
      }
      try {
        const DatasetManifest manifest = read_manifest(ds.manifest_path);
        const EvalResult r =
            evaluate_model(*store, pipe, symbols, manifest, rules);
        std::snprintf(line, sizeof(line),
                      "name=%s dataset=%s acc=%.4f ned=%.4f acc_h=%.4f "
                      "ned_h=%.4f acc_v=%.4f ned_v=%.4f n=%d\n",
                      model.name.c_str(), ds.name.c_str(), r.acc, r.ned,
                      r.acc_h, r.ned_h, r.acc_v, r.ned_v, r.n);
        report += line;
      } catch (const std::exception& e) {
        std::snprintf(line, sizeof(line), "name=%s dataset=%s error=%s\n",
                      model.name.c_str(), ds.name.c_str(), e.what());
        report += line;
      }
    }
  }
  return report;
}

}  // namespace ostr
