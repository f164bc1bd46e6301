#include "ostr/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ostr/error.hpp"

namespace ostr {

LossWeights weights_from_config(const RunConfig& cfg) {
  LossWeights w;
  w.alpha = cfg.get_double("loss.alpha");
  w.beta = cfg.get_double("loss.beta");
  w.gamma = cfg.get_double("loss.gamma");
  return w;
}

static ag::VarId zero_scalar(ag::Tape& t) {
  return t.constant(Tensor::zeros({1}));
}

LossTerm text_loss(ag::Tape& t, ag::VarId logits, const std::vector<int>& target,
                   int ignore_id) {
  const auto shape = t.val(logits).shape();
  if (shape.size() != 2)
    throw std::invalid_argument("text_loss: logits must be [T, vocab]");
  if (static_cast<size_t>(shape[0]) != target.size())
    throw std::invalid_argument("text_loss: logits rows " +
                                std::to_string(shape[0]) + " != target length " +
                                std::to_string(target.size()));

  std::vector<int> keep;
  std::vector<int> kept_targets;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == ignore_id) continue;
    keep.push_back(static_cast<int>(i));
    kept_targets.push_back(target[i]);
  }
  if (kept_targets.empty())
    throw std::invalid_argument("text_loss: every token is ignored");

  ag::VarId rows = logits;
  if (kept_targets.size() != target.size()) rows = ag::row_gather(t, logits, keep);
  const ag::VarId sum = ag::ce_rows_sum(t, rows, kept_targets);
  const int n = static_cast<int>(kept_targets.size());
  return {ag::scale(t, sum, 1.0 / n), n};
}

// Shared mean-CE over a list of single-row logit tensors.
static LossTerm ce_mean_rows(ag::Tape& t, const std::vector<ag::VarId>& logits,
                             const std::vector<int>& targets, const char* what) {
  if (logits.size() != targets.size())
    throw std::invalid_argument(std::string(what) +
                                ": logits/targets size mismatch");
  if (logits.empty()) return {zero_scalar(t), 0};
  ag::VarId sum = -1;
  for (size_t i = 0; i < logits.size(); ++i) {
    const ag::VarId ce = ag::ce_rows_sum(t, logits[i], {targets[i]});
    sum = (sum < 0) ? ce : ag::add(t, sum, ce);
  }
  const int n = static_cast<int>(logits.size());
  return {ag::scale(t, sum, 1.0 / n), n};
}

LossTerm orientation_loss(ag::Tape& t, const std::vector<ag::VarId>& logits,
                          const std::vector<Orientation>& targets) {
  std::vector<int> ids(targets.size());
  for (size_t i = 0; i < targets.size(); ++i)
    ids[i] = targets[i] == Orientation::Vertical ? 1 : 0;
  return ce_mean_rows(t, logits, ids, "orientation_loss");
}

LossTerm content_loss(ag::Tape& t, const std::vector<ag::VarId>& logits,
                      const std::vector<int>& targets) {
  return ce_mean_rows(t, logits, targets, "content_loss");
}

LossTerm reconstruction_loss(ag::Tape& t,
                             const std::vector<ReconstructionPair>& pairs,
                             const std::vector<OwnReconstruction>& singles) {
  const int n = static_cast<int>(pairs.size() + singles.size());
  if (n == 0) return {zero_scalar(t), 0};

  ag::VarId sum = -1;
  auto accumulate = [&](ag::VarId item) {
    sum = (sum < 0) ? item : ag::add(t, sum, item);
  };
  for (const auto& p : pairs) {
    if (p.h_a < 0 || p.v_a < 0 || p.h_b < 0 || p.v_b < 0)
      throw std::invalid_argument("reconstruction_loss: incomplete pair");
    ag::VarId four = ag::mse_vs_const(t, p.h_a, p.target_h_a);
    four = ag::add(t, four, ag::mse_vs_const(t, p.v_a, p.target_v_a));
    four = ag::add(t, four, ag::mse_vs_const(t, p.h_b, p.target_h_b));
    four = ag::add(t, four, ag::mse_vs_const(t, p.v_b, p.target_v_b));
    accumulate(ag::scale(t, four, 0.5));
  }
  for (const auto& s : singles) {
    if (s.image < 0)
      throw std::invalid_argument("reconstruction_loss: missing image");
    accumulate(ag::mse_vs_const(t, s.image, s.target));
  }
  return {ag::scale(t, sum, 1.0 / n), n};
}

TotalLoss total_loss(ag::Tape& t, const LossTerm& text, const LossTerm& orient,
                     const LossTerm& content, const LossTerm& recon,
                     const LossWeights& w) {
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0)
    throw std::invalid_argument("total_loss: weights must be >= 0");

  auto read = [&](const LossTerm& term, const char* name) {
    if (term.value < 0) return 0.0;
    const double v = t.val(term.value).at(0);
    if (std::isnan(v))
      throw TrainingDivergence(std::string("total_loss: ") + name + " is NaN");
    return v;
  };

  TotalLoss out;
  out.report.text = read(text, "text term");
  out.report.orient = read(orient, "orientation term");
  out.report.content = read(content, "content term");
  out.report.recon = read(recon, "reconstruction term");
  out.report.text_tokens = text.count;
  out.report.orient_count = orient.count;
  out.report.content_count = content.count;
  out.report.recon_count = recon.count;

  // Tape combination mirrors the scalar arithmetic term by term so the
  // reported total matches the node value bit for bit.
  ag::VarId acc = (text.value >= 0) ? text.value : zero_scalar(t);
  double total = out.report.text;
  if (orient.value >= 0) {
    acc = ag::add(t, acc, ag::scale(t, orient.value, w.alpha));
    total += w.alpha * out.report.orient;
  }
  if (content.value >= 0) {
    acc = ag::add(t, acc, ag::scale(t, content.value, w.beta));
    total += w.beta * out.report.content;
  }
  if (recon.value >= 0) {
    acc = ag::add(t, acc, ag::scale(t, recon.value, w.gamma));
    total += w.gamma * out.report.recon;
  }
  if (std::isnan(total)) throw TrainingDivergence("total_loss: total is NaN");
  out.value = acc;
  out.report.total = total;
  return out;
}

}  // namespace ostr
