#pragma once

// Versioned binary model container. Layout: magic "OSTR1", step counter,
// hash + echo of the resolved run configuration, then length-prefixed named
// tensor sections for parameters, batch-norm running statistics, and the
// optimizer accumulators. All integers and doubles are little-endian;
// save -> load -> save reproduces the file byte for byte.

#include <cstdint>
#include <map>
#include <string>

#include "ostr/model.hpp"
#include "ostr/tensor.hpp"

namespace ostr {

// AdaDelta accumulators, keyed by parameter name. A parameter appears only
// after its first update.
struct OptState {
  std::map<std::string, Tensor> grad_sq;    // decayed E[g^2]
  std::map<std::string, Tensor> update_sq;  // decayed E[dx^2]
};

struct Checkpoint {
  long long step = 0;
  std::string config_text;  // resolved key=value lines
  ParamStore params;        // model weights plus batch-norm state
  OptState opt;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ostr
