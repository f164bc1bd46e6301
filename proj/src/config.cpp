#include "ostr/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ostr {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.set("seed", "1");
  c.set("preprocess.canonical_height", "32");
  c.set("preprocess.canonical_width", "256");
  c.set("preprocess.vertical_aspect_threshold", "1.5");
  c.set("encoder.base_channels", "32");
  c.set("decoder.num_heads", "4");
  c.set("decoder.num_layers", "2");
  c.set("decoder.model_dim", "0");  // 0 = encoder output channels
  c.set("decoder.ffn_dim", "0");    // 0 = 4 * model_dim
  c.set("decoder.max_steps", "14");
  c.set("cirn.c1", "64");
  c.set("cirn.c2", "64");
  c.set("loss.alpha", "1");
  c.set("loss.beta", "1");
  c.set("loss.gamma", "5");
  c.set("rotation.enabled", "1");
  c.set("train.learning_rate", "1.0");
  c.set("train.rho", "0.9");
  c.set("train.weight_decay", "1e-4");
  c.set("train.batch_size", "16");
  c.set("train.steps", "2000");
  c.set("train.eval_every", "200");
  c.set("train.min_vertical_per_batch", "2");
  // Loss-term switches for the ablation rows.
  c.set("loss.use_lo", "1");
  c.set("loss.use_lc", "1");
  c.set("loss.use_lr", "1");
  // Corpus generation.
  c.set("data.classes", "64");
  c.set("data.train", "5000");
  c.set("data.val", "500");
  c.set("data.test", "500");
  c.set("data.vertical_frac", "0.2");
  c.set("data.len_min", "1");
  c.set("data.len_max", "4");
  c.set("data.noise.background", "0.15");
  c.set("data.noise.contrast", "0.3");
  c.set("data.noise.jitter", "0.5");
  return c;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) c.merge_line(line);
  return c;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file " + path);
  std::string line;
  while (std::getline(f, line)) merge_line(line);
}

void RunConfig::merge_line(const std::string& raw) {
  std::string line = raw;
  std::size_t hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  line = trim(line);
  if (line.empty()) return;
  std::size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config line missing '=': " + raw);
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  if (key.empty()) throw std::invalid_argument("config line with empty key: " + raw);
  kv_[key] = value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

const std::string& RunConfig::get_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::invalid_argument("missing config key " + key);
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get_str(key);
  std::size_t pos = 0;
  int r = 0;
  try {
    r = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + " is not an integer: " + v);
  }
  if (pos != v.size())
    throw std::invalid_argument("config key " + key + " is not an integer: " + v);
  return r;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get_str(key);
  std::size_t pos = 0;
  double r = 0;
  try {
    r = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + " is not a number: " + v);
  }
  if (pos != v.size())
    throw std::invalid_argument("config key " + key + " is not a number: " + v);
  return r;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get_str(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("config key " + key + " is not a boolean: " + v);
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : kv_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace ostr
