#pragma once

#include <cstdint>

#include "ostr/autograd.hpp"
#include "ostr/model.hpp"

namespace ostr {

// Three residual stages over a stride-2 stem; total downsampling /8 in both
// dimensions. The stem convolution is 3x3 (not 7x7), the third stage has no
// pooling (downsampling is its entry stride), and there is no fourth stage.
struct EncoderConfig {
  int base_channels = 32;
};

inline int encoder_out_channels(const EncoderConfig& cfg) {
  return 4 * cfg.base_channels;
}

// Registers all encoder parameters ("enc.*") in the store.
void init_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                         std::uint64_t seed);

// images: [N,1,H,W], H and W divisible by 8 -> features [N,C,H/8,W/8].
ag::VarId encode(ag::Tape& t, TapeBind& p, const EncoderConfig& cfg,
                 ag::VarId images, ag::BnMode mode);

}  // namespace ostr
