// Command-line entry point: corpus generation, training, evaluation, the
// similarity probe, reconstruction dumps, and the scripted ablation table.
// Configuration precedence: built-in defaults <- OSTR_SEED <- dataset
// provenance <- config file <- --set lines <- specific flags. Every artifact
// written embeds or accompanies the resolved configuration.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ostr/checkpoint.hpp"
#include "ostr/cirn.hpp"
#include "ostr/config.hpp"
#include "ostr/decoder.hpp"
#include "ostr/encoder.hpp"
#include "ostr/eval.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/image.hpp"
#include "ostr/pipeline.hpp"
#include "ostr/rng.hpp"
#include "ostr/train.hpp"

namespace fs = std::filesystem;
using namespace ostr;

namespace {

const char* kUsage = R"(usage: ostr <command> [flags]

commands:
  gen-data     synthesize a glyph corpus: images, manifests, charset, config
  train        train a recognizer on a generated corpus
  eval         score checkpoints on manifests (machine-readable table)
  probe        orientation/content similarity probe on a checkpoint
  reconstruct  dump character reconstruction grids as a PGM image
  ablate       train the loss/rotation variant table with shared seeds

common flags:
  --workdir DIR   change into DIR first (all paths relative to it)
  --config FILE   key=value config file (defaults <- file <- flags)
  --set KEY=VAL   override one config entry (repeatable)
  --seed N        global seed (env OSTR_SEED is the fallback)

gen-data:  --out DIR [--classes N] [--train N] [--val N] [--test N]
           [--vertical-frac F] [--len-min N] [--len-max N]
           [--noise-background F] [--noise-contrast F] [--noise-jitter F]
train:     --data DIR [--out FILE] [--trace FILE] [--variant full|base]
           [--no-rotation] [--no-lc] [--no-lo] [--no-lr] [--alpha F]
           [--beta F] [--gamma F] [--batch-size N] [--steps N]
           [--eval-every N] [--min-vertical N] [--lr F] [--rho F]
           [--weight-decay F] [--classes N] [--charset-seed N] [--quiet]
eval:      --checkpoint [NAME=]FILE ... --dataset [NAME=]FILE ...
           [--out FILE] [--fold-map FILE] [--simplify-map FILE]
           [--no-case-fold] [--no-strip]
probe:     --checkpoint FILE [--source content|raw] [--pairs N] [--out FILE]
reconstruct: --checkpoint FILE --out FILE.pgm [--pairs N]
ablate:    --data DIR [--out DIR] [--seeds N] [--steps N] [--batch-size N]
           [--eval-every N] [--min-vertical N] [--verbose]

exit codes: 0 success, 1 runtime failure, 2 usage error
)";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --flag VALUE pairs plus bare switches; every flag must be declared.
class Flags {
 public:
  Flags(int argc, char** argv, int start, std::set<std::string> value_flags,
        std::set<std::string> switches)
      : value_flags_(std::move(value_flags)), switches_(std::move(switches)) {
    for (int i = start; i < argc; ++i) {
      std::string a = argv[i];
      if (a.rfind("--", 0) != 0)
        throw UsageError("unexpected argument '" + a + "'");
      a = a.substr(2);
      if (switches_.count(a)) {
        seen_[a].push_back("1");
      } else if (value_flags_.count(a)) {
        if (i + 1 >= argc) throw UsageError("flag --" + a + " needs a value");
        seen_[a].push_back(argv[++i]);
      } else {
        throw UsageError("unknown flag --" + a);
      }
    }
  }

  bool has(const std::string& name) const { return seen_.count(name) > 0; }

  const std::string& get(const std::string& name) const {
    auto it = seen_.find(name);
    if (it == seen_.end()) throw UsageError("missing required flag --" + name);
    return it->second.back();
  }

  std::string get_or(const std::string& name, const std::string& def) const {
    auto it = seen_.find(name);
    return it == seen_.end() ? def : it->second.back();
  }

  std::vector<std::string> all(const std::string& name) const {
    auto it = seen_.find(name);
    return it == seen_.end() ? std::vector<std::string>{} : it->second;
  }

 private:
  std::set<std::string> value_flags_, switches_;
  std::map<std::string, std::vector<std::string>> seen_;
};

std::set<std::string> with_common(std::set<std::string> v) {
  v.insert("workdir");
  v.insert("config");
  v.insert("set");
  v.insert("seed");
  return v;
}

void enter_workdir(const Flags& f) {
  if (!f.has("workdir")) return;
  std::error_code ec;
  fs::current_path(f.get("workdir"), ec);
  if (ec)
    throw std::runtime_error("cannot enter workdir " + f.get("workdir") + ": " +
                             ec.message());
}

double parse_num(const std::string& flag, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("flag --" + flag + " is not a number: " + v);
  }
}

std::uint64_t parse_u64(const std::string& what, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long s = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw UsageError(what + " is not an unsigned integer: " + v);
  }
}

int parse_int(const std::string& flag, const std::string& v) {
  double d = parse_num(flag, v);
  int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw UsageError("flag --" + flag + " is not an integer: " + v);
  return i;
}

// Copies a flag value into a config key, rejecting non-numeric input early.
void route(RunConfig& cfg, const Flags& f, const char* flag, const char* key,
           bool numeric = true) {
  if (!f.has(flag)) return;
  if (numeric) parse_num(flag, f.get(flag));
  cfg.set(key, f.get(flag));
}

// defaults <- OSTR_SEED <- pre (dataset provenance) <- file <- --set <- --seed
RunConfig merged_config(const Flags& f, const RunConfig* pre = nullptr) {
  RunConfig cfg = RunConfig::defaults();
  if (const char* env = std::getenv("OSTR_SEED")) cfg.set("seed", env);
  if (pre)
    for (const auto& [k, v] : pre->entries()) cfg.set(k, v);
  if (f.has("config")) cfg.load_file(f.get("config"));
  for (const std::string& line : f.all("set")) cfg.merge_line(line);
  if (f.has("seed")) {
    parse_u64("flag --seed", f.get("seed"));
    cfg.set("seed", f.get("seed"));
  }
  return cfg;
}

std::uint64_t seed_of(const RunConfig& cfg) {
  return parse_u64("config key seed", cfg.get_str("seed"));
}

std::uint64_t charset_seed_of(const RunConfig& cfg) {
  const std::string& v = cfg.has("model.charset_seed")
                             ? cfg.get_str("model.charset_seed")
                             : cfg.get_str("seed");
  return parse_u64("charset seed", v);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

void append_config_footer(std::string& text, const RunConfig& cfg) {
  text += "# config-begin\n";
  std::istringstream in(cfg.serialize());
  std::string line;
  while (std::getline(in, line)) text += "# " + line + "\n";
  text += "# config-end\n";
}

int count_vertical(const DatasetManifest& m) {
  int v = 0;
  for (const ManifestRecord& r : m.records)
    v += r.orientation == Orientation::Vertical ? 1 : 0;
  return v;
}

void print_split(const char* name, const DatasetManifest& m,
                 const std::string& path) {
  const int n = static_cast<int>(m.records.size());
  const int v = count_vertical(m);
  std::printf("split=%s n=%d h=%d v=%d -> %s\n", name, n, n - v, v,
              path.c_str());
}

// gen-data -------------------------------------------------------------------

int cmd_gen_data(const Flags& f) {
  RunConfig cfg = merged_config(f);
  route(cfg, f, "classes", "data.classes");
  route(cfg, f, "train", "data.train");
  route(cfg, f, "val", "data.val");
  route(cfg, f, "test", "data.test");
  route(cfg, f, "vertical-frac", "data.vertical_frac");
  route(cfg, f, "len-min", "data.len_min");
  route(cfg, f, "len-max", "data.len_max");
  route(cfg, f, "noise-background", "data.noise.background");
  route(cfg, f, "noise-contrast", "data.noise.contrast");
  route(cfg, f, "noise-jitter", "data.noise.jitter");

  const std::string out = f.get("out");
  const int classes = cfg.get_int("data.classes");
  const DatasetCounts counts{cfg.get_int("data.train"), cfg.get_int("data.val"),
                             cfg.get_int("data.test")};
  const double vfrac = cfg.get_double("data.vertical_frac");
  const int len_min = cfg.get_int("data.len_min");
  const int len_max = cfg.get_int("data.len_max");
  const NoiseConfig noise{cfg.get_double("data.noise.background"),
                          cfg.get_double("data.noise.contrast"),
                          cfg.get_double("data.noise.jitter")};
  const std::uint64_t seed = seed_of(cfg);

  if (classes < 2) throw UsageError("need at least 2 classes");
  if (counts.train < 1) throw UsageError("need at least one training line");
  if (counts.val < 0 || counts.test < 0)
    throw UsageError("split sizes must be non-negative");
  if (vfrac < 0.0 || vfrac > 1.0)
    throw UsageError("vertical fraction must be in [0, 1]");
  if (len_min < 1 || len_min > len_max || len_max > 12)
    throw UsageError("label lengths must satisfy 1 <= min <= max <= 12");
  if (len_max + 1 > cfg.get_int("decoder.max_steps"))
    std::fprintf(stderr,
                 "warning: len-max %d exceeds decoder.max_steps %d - 1; such "
                 "lines cannot be trained on without raising it\n",
                 len_max, cfg.get_int("decoder.max_steps"));

  const Charset cs = build_charset(classes, seed);
  const DatasetFiles files =
      generate_dataset(cs, counts, vfrac, seed, out, noise, len_min, len_max);
  const DatasetManifest vertical = build_vertical_testset(files.test);
  const std::string vert_path = (fs::path(out) / "test_vertical.tsv").string();
  write_manifest(vertical, vert_path);

  cfg.set("model.num_classes", std::to_string(classes));
  cfg.set("model.charset_seed", std::to_string(seed));
  const std::string cfg_path = (fs::path(out) / "config.txt").string();
  write_text(cfg_path, cfg.serialize());

  print_split("train", files.train, (fs::path(out) / "train.tsv").string());
  print_split("val", files.val, (fs::path(out) / "val.tsv").string());
  print_split("test", files.test, (fs::path(out) / "test.tsv").string());
  print_split("test_vertical", vertical, vert_path);
  std::printf("charset classes=%d -> %s\n", classes, files.charset_path.c_str());
  std::printf("config -> %s\n", cfg_path.c_str());
  return 0;
}

// train ----------------------------------------------------------------------

// model.* / data.* keys from the dataset's config echo, if it has one.
RunConfig dataset_provenance(const std::string& data_dir) {
  RunConfig pre;
  const std::string path = (fs::path(data_dir) / "config.txt").string();
  if (!fs::exists(path)) return pre;
  RunConfig ds;
  ds.load_file(path);
  for (const auto& [k, v] : ds.entries())
    if (k.rfind("model.", 0) == 0 || k.rfind("data.", 0) == 0) pre.set(k, v);
  return pre;
}

void apply_variant_flags(RunConfig& cfg, const Flags& f) {
  if (f.has("variant")) {
    const std::string v = f.get("variant");
    if (v == "full") {
      cfg.set("rotation.enabled", "1");
      cfg.set("loss.use_lo", "1");
      cfg.set("loss.use_lc", "1");
      cfg.set("loss.use_lr", "1");
    } else if (v == "base") {
      cfg.set("loss.use_lo", "0");
      cfg.set("loss.use_lc", "0");
      cfg.set("loss.use_lr", "0");
    } else {
      throw UsageError("unknown variant '" + v + "' (full|base)");
    }
  }
  if (f.has("no-rotation")) cfg.set("rotation.enabled", "0");
  if (f.has("no-lo")) cfg.set("loss.use_lo", "0");
  if (f.has("no-lc")) cfg.set("loss.use_lc", "0");
  if (f.has("no-lr")) cfg.set("loss.use_lr", "0");
  route(cfg, f, "alpha", "loss.alpha");
  route(cfg, f, "beta", "loss.beta");
  route(cfg, f, "gamma", "loss.gamma");
}

void apply_train_flags(RunConfig& cfg, const Flags& f) {
  route(cfg, f, "batch-size", "train.batch_size");
  route(cfg, f, "steps", "train.steps");
  route(cfg, f, "eval-every", "train.eval_every");
  route(cfg, f, "min-vertical", "train.min_vertical_per_batch");
  route(cfg, f, "lr", "train.learning_rate");
  route(cfg, f, "rho", "train.rho");
  route(cfg, f, "weight-decay", "train.weight_decay");
}

struct LoadedDataset {
  DatasetManifest train, val, test, vertical;
  bool has_test = false, has_vertical = false;
  Charset charset;
  int classes = 0;
};

LoadedDataset load_dataset(const std::string& data_dir, const RunConfig& cfg) {
  LoadedDataset d;
  if (!cfg.has("model.num_classes"))
    throw UsageError(
        "no class count: dataset has no config.txt and --classes not given");
  d.classes = cfg.get_int("model.num_classes");
  d.charset = build_charset(d.classes, charset_seed_of(cfg));

  d.train = read_manifest((fs::path(data_dir) / "train.tsv").string());
  const std::string val_path = (fs::path(data_dir) / "val.tsv").string();
  if (fs::exists(val_path)) d.val = read_manifest(val_path);
  const std::string test_path = (fs::path(data_dir) / "test.tsv").string();
  if (fs::exists(test_path)) {
    d.test = read_manifest(test_path);
    d.has_test = true;
  }
  const std::string vert_path =
      (fs::path(data_dir) / "test_vertical.tsv").string();
  if (fs::exists(vert_path)) {
    d.vertical = read_manifest(vert_path);
    d.has_vertical = !d.vertical.records.empty();
  }

  const std::string cs_path = (fs::path(data_dir) / "charset.tsv").string();
  if (fs::exists(cs_path)) {
    const SymbolTable st = SymbolTable::read_tsv(cs_path);
    if (static_cast<int>(st.symbols.size()) != d.classes)
      throw std::runtime_error(
          "charset.tsv lists " + std::to_string(st.symbols.size()) +
          " classes but the model expects " + std::to_string(d.classes));
  }
  return d;
}

std::string trace_text(const TrainResult& res, const RunConfig& cfg) {
  std::string txt = "# schema=ostr-trace-v1\n# step total text orient content recon\n";
  char line[192];
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const LossReport& r = res.trace[i];
    std::snprintf(line, sizeof line, "%zu %.17g %.17g %.17g %.17g %.17g\n", i,
                  r.total, r.text, r.orient, r.content, r.recon);
    txt += line;
  }
  for (const EvalPoint& e : res.evals) {
    std::snprintf(line, sizeof line, "# eval step=%lld acc=%.6f ned=%.6f\n",
                  e.step, e.acc, e.ned);
    txt += line;
  }
  append_config_footer(txt, cfg);
  return txt;
}

int cmd_train(const Flags& f) {
  const std::string data_dir = f.get("data");
  const RunConfig pre = dataset_provenance(data_dir);
  RunConfig cfg = merged_config(f, &pre);
  apply_variant_flags(cfg, f);
  apply_train_flags(cfg, f);
  route(cfg, f, "classes", "model.num_classes");
  route(cfg, f, "charset-seed", "model.charset_seed");
  if (!cfg.has("model.charset_seed"))
    cfg.set("model.charset_seed", cfg.get_str("seed"));

  const LoadedDataset d = load_dataset(data_dir, cfg);
  const PipelineConfig pipe = pipeline_from_config(cfg, d.classes);
  TrainConfig tcfg = train_config_from_config(cfg);
  tcfg.verbose = !f.has("quiet");

  std::fprintf(stderr,
               "training: %zu train / %zu val lines, %d classes, %lld steps, "
               "batch %d\n",
               d.train.records.size(), d.val.records.size(), d.classes,
               tcfg.steps, tcfg.batch_size);

  const TrainResult res = train(d.train, d.val, d.charset, pipe, tcfg,
                                cfg.serialize());

  const std::string out = f.get_or("out", "model.ostr");
  save_checkpoint(out, res.best);
  if (f.has("trace")) write_text(f.get("trace"), trace_text(res, cfg));

  std::printf(
      "steps_run=%lld diverged=%d best_step=%lld best_acc=%.4f best_ned=%.4f "
      "checkpoint=%s\n",
      res.steps_run, res.diverged ? 1 : 0, res.best_step, res.best_acc,
      res.best_ned, out.c_str());
  return res.diverged ? 1 : 0;
}

// eval -----------------------------------------------------------------------

std::pair<std::string, std::string> split_named(const std::string& s) {
  const std::size_t eq = s.find('=');
  if (eq != std::string::npos) return {s.substr(0, eq), s.substr(eq + 1)};
  return {fs::path(s).stem().string(), s};
}

int cmd_eval(const Flags& f) {
  const RunConfig cfg = merged_config(f);
  NormalizationRules rules = NormalizationRules::standard();
  if (f.has("fold-map"))
    for (const auto& [k, v] : NormalizationRules::load_map(f.get("fold-map")))
      rules.width_fold[k] = v;
  if (f.has("simplify-map"))
    for (const auto& [k, v] :
         NormalizationRules::load_map(f.get("simplify-map")))
      rules.simplify[k] = v;
  if (f.has("no-case-fold")) rules.case_fold = false;
  if (f.has("no-strip")) rules.strip_whitespace = false;

  std::vector<BenchmarkModel> models;
  for (const std::string& s : f.all("checkpoint")) {
    auto [name, path] = split_named(s);
    models.push_back({name, path});
  }
  std::vector<BenchmarkDataset> datasets;
  for (const std::string& s : f.all("dataset")) {
    auto [name, path] = split_named(s);
    datasets.push_back({name, path});
  }
  if (models.empty()) throw UsageError("need at least one --checkpoint");
  if (datasets.empty()) throw UsageError("need at least one --dataset");

  const std::string report = run_benchmark(models, datasets, rules);
  std::fputs(report.c_str(), stdout);
  if (f.has("out")) {
    std::string txt = report;
    append_config_footer(txt, cfg);
    write_text(f.get("out"), txt);
  }

  int rows = 0, errors = 0;
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++rows;
    if (line.find(" error=") != std::string::npos) ++errors;
  }
  return rows > 0 && errors == rows ? 1 : 0;
}

// probe ----------------------------------------------------------------------

int cmd_probe(const Flags& f) {
  const RunConfig cfg = merged_config(f);
  Checkpoint ck = load_checkpoint(f.get("checkpoint"));
  const RunConfig mcfg = RunConfig::parse(ck.config_text);
  const int classes = mcfg.get_int("model.num_classes");
  const PipelineConfig pipe = pipeline_from_config(mcfg, classes);
  const Charset cs = build_charset(classes, charset_seed_of(mcfg));

  const std::string src = f.get_or("source", "content");
  FeatureSource source;
  if (src == "content")
    source = FeatureSource::ContentVectors;
  else if (src == "raw")
    source = FeatureSource::RawFeatures;
  else
    throw UsageError("unknown --source '" + src + "' (content|raw)");
  const int pairs = parse_int("pairs", f.get_or("pairs", "200"));
  if (pairs < 1) throw UsageError("--pairs must be >= 1");

  const SimilarityReport rep =
      similarity_probe(ck.params, pipe, cs, source, pairs, seed_of(cfg));
  char line[256];
  std::snprintf(line, sizeof line,
                "source=%s pairs=%d sc_mean=%.6f sc_std=%.6f so_mean=%.6f "
                "so_std=%.6f\n",
                src.c_str(), rep.pairs, rep.sc_mean, rep.sc_std, rep.so_mean,
                rep.so_std);
  std::fputs(line, stdout);
  if (f.has("out")) {
    std::string txt = std::string("# schema=ostr-probe-v1\n") + line;
    append_config_footer(txt, mcfg);
    write_text(f.get("out"), txt);
  }
  return 0;
}

// reconstruct ----------------------------------------------------------------

void blit(Image& grid, int r0, int c0, const Tensor& img) {
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      grid.at(r0 + r, c0 + c) = std::clamp(img.at(r, c), 0.0, 1.0);
}

int cmd_reconstruct(const Flags& f) {
  const RunConfig cfg = merged_config(f);
  Checkpoint ck = load_checkpoint(f.get("checkpoint"));
  const RunConfig mcfg = RunConfig::parse(ck.config_text);
  const int classes = mcfg.get_int("model.num_classes");
  const PipelineConfig pipe = pipeline_from_config(mcfg, classes);
  const Charset cs = build_charset(classes, charset_seed_of(mcfg));
  const int pairs = parse_int("pairs", f.get_or("pairs", "4"));
  if (pairs < 1) throw UsageError("--pairs must be >= 1");
  const std::uint64_t seed = seed_of(cfg);
  const std::string out = f.get("out");

  // One row per pair: reconstruction next to its printed target, for both
  // characters in both orientations.
  const int tile = 32, gap = 2, cols = 8;
  Image grid(pairs * tile + (pairs - 1) * gap,
             cols * tile + (cols - 1) * gap);
  for (double& px : grid.pixels) px = 0.5;

  for (int k = 0; k < pairs; ++k) {
    Rng rng(mix_seed(seed, k));
    auto draw_label = [&] {
      std::vector<int> l(2);
      for (int& c : l) c = rng.uniform_int(0, classes - 1);
      return l;
    };
    const TextLineSample h =
        synth_text_line(cs, draw_label(), Orientation::Horizontal, zero_noise(),
                        mix_seed(seed, 2 * k));
    const TextLineSample v =
        synth_text_line(cs, draw_label(), Orientation::Vertical, zero_noise(),
                        mix_seed(seed, 2 * k + 1));
    const PreparedSample ph = prepare_sample(h.image, h.label, h.orientation, pipe);
    const PreparedSample pv = prepare_sample(v.image, v.label, v.orientation, pipe);

    ag::Tape t;
    TapeBind p(t, ck.params, /*requires_grad=*/false);
    const ag::VarId input = t.constant(stack_images({&ph, &pv}));
    const ag::VarId feat = encode(t, p, pipe.enc, input, ag::BnMode::Eval);
    auto first_bundle = [&](const PreparedSample& s, int n) {
      std::vector<int> shifted = {pipe.dec.bos()};
      shifted.insert(shifted.end(), s.classes.begin(), s.classes.end());
      const DecodeResult dr =
          decode_teacher_forced(t, p, pipe.dec, feat, n, shifted, s.valid_width);
      return make_bundle(t, p, pipe.cirn, dr.fseq, dr.abar, 0, s.classes[0],
                         s.orientation);
    };
    const CharacterBundle ba = first_bundle(ph, 0);
    const CharacterBundle bb = first_bundle(pv, 1);
    const ReconstructionPair pr =
        exchange_and_reconstruct(t, p, pipe.cirn, cs, ba, bb);

    const Tensor tiles[cols] = {t.val(pr.h_a), pr.target_h_a, t.val(pr.v_a),
                                pr.target_v_a, t.val(pr.h_b), pr.target_h_b,
                                t.val(pr.v_b), pr.target_v_b};
    for (int c = 0; c < cols; ++c)
      blit(grid, k * (tile + gap), c * (tile + gap), tiles[c]);
  }

  write_pgm(grid, out);
  write_text(out + ".config", mcfg.serialize());
  std::printf("pairs=%d grid=%dx%d -> %s (+ %s.config)\n", pairs, grid.height,
              grid.width, out.c_str(), out.c_str());
  return 0;
}

// ablate ---------------------------------------------------------------------

struct VariantSpec {
  const char* name;
  bool rotation, lc, lo, lr;
};

// The loss/rotation table rows, base to full.
const VariantSpec kVariants[] = {
    {"base", false, false, false, false},
    {"rotation", true, false, false, false},
    {"rot-lc-lo", true, true, true, false},
    {"rot-lc-lr", true, true, false, true},
    {"rot-lo-lr", true, false, true, true},
    {"full", true, true, true, true},
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_ablate(const Flags& f) {
  const std::string data_dir = f.get("data");
  const RunConfig pre = dataset_provenance(data_dir);
  RunConfig cfg = merged_config(f, &pre);
  apply_train_flags(cfg, f);
  route(cfg, f, "classes", "model.num_classes");
  route(cfg, f, "charset-seed", "model.charset_seed");
  if (!cfg.has("model.charset_seed"))
    cfg.set("model.charset_seed", cfg.get_str("seed"));
  const int seeds = parse_int("seeds", f.get_or("seeds", "3"));
  if (seeds < 1) throw UsageError("--seeds must be >= 1");
  const std::string out_dir = f.get_or("out", "ablation");
  fs::create_directories(out_dir);

  const LoadedDataset d = load_dataset(data_dir, cfg);
  if (!d.has_test)
    throw std::runtime_error("ablate needs " + data_dir + "/test.tsv to score");
  const SymbolTable symbols = SymbolTable::for_classes(d.classes);
  const NormalizationRules rules = NormalizationRules::standard();
  const std::uint64_t base_seed = seed_of(cfg);

  std::string table = "# schema=ostr-ablate-v1\n";
  std::fputs(table.c_str(), stdout);
  char line[320];
  for (const VariantSpec& var : kVariants) {
    std::vector<double> accs, neds, vaccs;
    for (int s = 0; s < seeds; ++s) {
      RunConfig run = cfg;
      run.set("rotation.enabled", var.rotation ? "1" : "0");
      run.set("loss.use_lc", var.lc ? "1" : "0");
      run.set("loss.use_lo", var.lo ? "1" : "0");
      run.set("loss.use_lr", var.lr ? "1" : "0");
      run.set("seed", std::to_string(base_seed + s));
      const PipelineConfig pipe = pipeline_from_config(run, d.classes);
      TrainConfig tcfg = train_config_from_config(run);
      tcfg.verbose = f.has("verbose");

      std::fprintf(stderr, "ablate: variant=%s seed=%llu steps=%lld\n",
                   var.name,
                   static_cast<unsigned long long>(base_seed + s), tcfg.steps);
      TrainResult res =
          train(d.train, d.val, d.charset, pipe, tcfg, run.serialize());
      const std::string ck_path =
          (fs::path(out_dir) /
           (std::string(var.name) + "-s" + std::to_string(base_seed + s) +
            ".ostr"))
              .string();
      save_checkpoint(ck_path, res.best);

      const EvalResult er =
          evaluate_model(res.best.params, pipe, symbols, d.test, rules);
      accs.push_back(er.acc);
      neds.push_back(er.ned);
      double vacc = -1.0;
      if (d.has_vertical) {
        const EvalResult ev =
            evaluate_model(res.best.params, pipe, symbols, d.vertical, rules);
        vacc = ev.acc;
        vaccs.push_back(ev.acc);
      }
      std::snprintf(line, sizeof line,
                    "variant=%s rotation=%d lc=%d lo=%d lr=%d seed=%llu "
                    "acc=%.4f ned=%.4f acc_vertical=%.4f diverged=%d "
                    "checkpoint=%s\n",
                    var.name, var.rotation ? 1 : 0, var.lc ? 1 : 0,
                    var.lo ? 1 : 0, var.lr ? 1 : 0,
                    static_cast<unsigned long long>(base_seed + s), er.acc,
                    er.ned, vacc, res.diverged ? 1 : 0, ck_path.c_str());
      table += line;
      std::fputs(line, stdout);
      std::fflush(stdout);
    }
    std::snprintf(line, sizeof line,
                  "variant=%s seeds=%d median_acc=%.4f median_ned=%.4f "
                  "median_acc_vertical=%.4f\n",
                  var.name, seeds, median(accs), median(neds),
                  vaccs.empty() ? -1.0 : median(vaccs));
    table += line;
    std::fputs(line, stdout);
    std::fflush(stdout);
  }

  append_config_footer(table, cfg);
  const std::string table_path = (fs::path(out_dir) / "ablation.txt").string();
  write_text(table_path, table);
  std::fprintf(stderr, "table -> %s\n", table_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fputs(kUsage, stderr);
    return 2;
  }
  const std::string cmd = argv[1];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    std::fputs(kUsage, stdout);
    return 0;
  }
  try {
    if (cmd == "gen-data") {
      Flags f(argc, argv, 2,
              with_common({"out", "classes", "train", "val", "test",
                           "vertical-frac", "len-min", "len-max",
                           "noise-background", "noise-contrast",
                           "noise-jitter"}),
              {});
      enter_workdir(f);
      return cmd_gen_data(f);
    }
    if (cmd == "train") {
      Flags f(argc, argv, 2,
              with_common({"data", "out", "trace", "variant", "alpha", "beta",
                           "gamma", "batch-size", "steps", "eval-every",
                           "min-vertical", "lr", "rho", "weight-decay",
                           "classes", "charset-seed"}),
              {"no-rotation", "no-lc", "no-lo", "no-lr", "quiet"});
      enter_workdir(f);
      return cmd_train(f);
    }
    if (cmd == "eval") {
      Flags f(argc, argv, 2,
              with_common({"checkpoint", "dataset", "out", "fold-map",
                           "simplify-map"}),
              {"no-case-fold", "no-strip"});
      enter_workdir(f);
      return cmd_eval(f);
    }
    if (cmd == "probe") {
      Flags f(argc, argv, 2, with_common({"checkpoint", "source", "pairs",
                                          "out"}),
              {});
      enter_workdir(f);
      return cmd_probe(f);
    }
    if (cmd == "reconstruct") {
      Flags f(argc, argv, 2, with_common({"checkpoint", "out", "pairs"}), {});
      enter_workdir(f);
      return cmd_reconstruct(f);
    }
    if (cmd == "ablate") {
      Flags f(argc, argv, 2,
              with_common({"data", "out", "seeds", "steps", "batch-size",
                           "eval-every", "min-vertical", "lr", "rho",
                           "weight-decay", "classes", "charset-seed"}),
              {"verbose"});
      enter_workdir(f);
      return cmd_ablate(f);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr, "unknown command '%s'\n\n%s", cmd.c_str(), kUsage);
  return 2;
}
