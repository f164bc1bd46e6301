#include "ostr/encoder.hpp"

#include <stdexcept>
#include <string>

namespace ostr {

namespace {

using ag::Tape;
using ag::VarId;

struct StagePlan {
  int in_ch;
  int out_ch;
  int stride;  // entry stride of the first block
};

StagePlan stage_plan(const EncoderConfig& cfg, int stage) {
  const int b = cfg.base_channels;
  switch (stage) {
    case 1: return {b, b, 1};
    case 2: return {b, 2 * b, 2};
    default: return {2 * b, 4 * b, 2};
  }
}

void init_conv(ParamStore& s, const std::string& prefix, int in_ch, int out_ch,
               int k, std::uint64_t seed) {
  s.add_uniform(prefix + ".w", {out_ch, in_ch, k, k}, in_ch * k * k, seed);
  s.add_zeros(prefix + ".b", {out_ch});
}

void init_bn(ParamStore& s, const std::string& prefix, int ch) {
  s.add_full(prefix + ".g", {ch}, 1.0);
  s.add_zeros(prefix + ".b", {ch});
  s.add_bn_state(prefix, ch);
}

VarId conv_bn(Tape& t, TapeBind& p, const std::string& prefix, VarId x,
              int stride, ag::BnMode mode) {
  VarId y = ag::conv2d(t, x, p[prefix + ".w"], p[prefix + ".b"], stride, 1);
  return ag::batchnorm(t, y, p[prefix + ".bn.g"], p[prefix + ".bn.b"],
                       p.store().bn_state(prefix + ".bn"), mode);
}

VarId residual_block(Tape& t, TapeBind& p, const std::string& prefix, VarId x,
                     int in_ch, int out_ch, int stride, ag::BnMode mode) {
  VarId h = ag::relu(t, conv_bn(t, p, prefix + ".conv1", x, stride, mode));
  h = conv_bn(t, p, prefix + ".conv2", h, 1, mode);
  VarId skip = x;
  if (in_ch != out_ch || stride != 1) {
    VarId pr = ag::conv2d(t, x, p[prefix + ".proj.w"], p[prefix + ".proj.b"],
                          stride, 0);
    skip = ag::batchnorm(t, pr, p[prefix + ".proj.bn.g"],
                         p[prefix + ".proj.bn.b"],
                         p.store().bn_state(prefix + ".proj.bn"), mode);
  }
  return ag::relu(t, ag::add(t, h, skip));
}

}  // namespace

void init_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                         std::uint64_t seed) {
  init_conv(store, "enc.stem", 1, cfg.base_channels, 3, seed);
  init_bn(store, "enc.stem.bn", cfg.base_channels);
  for (int stage = 1; stage <= 3; ++stage) {
    const StagePlan plan = stage_plan(cfg, stage);
    for (int block = 0; block < 2; ++block) {
      const std::string prefix =
          "enc.s" + std::to_string(stage) + ".b" + std::to_string(block);
      const int in_ch = block == 0 ? plan.in_ch : plan.out_ch;
      const int stride = block == 0 ? plan.stride : 1;
      init_conv(store, prefix + ".conv1", in_ch, plan.out_ch, 3, seed);
      init_bn(store, prefix + ".conv1.bn", plan.out_ch);
      init_conv(store, prefix + ".conv2", plan.out_ch, plan.out_ch, 3, seed);
      init_bn(store, prefix + ".conv2.bn", plan.out_ch);
      if (in_ch != plan.out_ch || stride != 1) {
        init_conv(store, prefix + ".proj", in_ch, plan.out_ch, 1, seed);
        init_bn(store, prefix + ".proj.bn", plan.out_ch);
      }
    }
  }
}

ag::VarId encode(ag::Tape& t, TapeBind& p, const EncoderConfig& cfg,
                 ag::VarId images, ag::BnMode mode) {
  const Tensor& x = t.val(images);
  if (x.ndim() != 4 || x.dim(1) != 1)
    throw std::invalid_argument("encode expects images shaped [N,1,H,W]");
  if (x.dim(2) % 8 != 0 || x.dim(3) % 8 != 0)
    throw std::invalid_argument("encode needs H and W divisible by 8");

  VarId h = ag::relu(t, conv_bn(t, p, "enc.stem", images, 2, mode));
  for (int stage = 1; stage <= 3; ++stage) {
    const StagePlan plan = stage_plan(cfg, stage);
    for (int block = 0; block < 2; ++block) {
      const std::string prefix =
          "enc.s" + std::to_string(stage) + ".b" + std::to_string(block);
      const int in_ch = block == 0 ? plan.in_ch : plan.out_ch;
      const int stride = block == 0 ? plan.stride : 1;
      h = residual_block(t, p, prefix, h, in_ch, plan.out_ch, stride, mode);
    }
  }
  return h;
}

}  // namespace ostr
