#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ostr/autograd.hpp"
#include "ostr/tensor.hpp"

namespace ostr {

// Named parameter container shared by all model parts. Registration order is
// recorded so checkpoints and optimizer state iterate deterministically.
// Initialization draws one private stream per parameter, derived from the
// base seed and the parameter name, so adding a parameter never shifts the
// values of existing ones.
class ParamStore {
 public:
  Tensor& add_zeros(const std::string& name, std::vector<int> shape);
  Tensor& add_full(const std::string& name, std::vector<int> shape, double v);
  // Uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)].
  Tensor& add_uniform(const std::string& name, std::vector<int> shape,
                      int fan_in, std::uint64_t seed);

  ag::BnState& add_bn_state(const std::string& name, int channels);

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  ag::BnState& bn_state(const std::string& name);
  const ag::BnState& bn_state(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& bn_names() const { return bn_names_; }

  std::int64_t total_elements() const;

 private:
  Tensor& insert(const std::string& name, Tensor t);

  std::vector<std::string> names_;
  std::vector<std::string> bn_names_;
  std::map<std::string, Tensor> tensors_;
  std::map<std::string, ag::BnState> bn_;
};

// Lazily places store entries onto a tape, one input node per parameter per
// forward pass, and remembers the mapping so gradients can be read back by
// name after backward().
class TapeBind {
 public:
  TapeBind(ag::Tape& tape, ParamStore& store, bool requires_grad = true)
      : tape_(tape), store_(store), requires_grad_(requires_grad) {}

  ag::VarId operator[](const std::string& name);

  const std::map<std::string, ag::VarId>& bound() const { return ids_; }
  ParamStore& store() { return store_; }

 private:
  ag::Tape& tape_;
  ParamStore& store_;
  bool requires_grad_;
  std::map<std::string, ag::VarId> ids_;
};

}  // namespace ostr
