#include "ostr/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ostr/rng.hpp"

namespace ostr {

Tensor& ParamStore::insert(const std::string& name, Tensor t) {
  if (tensors_.count(name))
    throw std::invalid_argument("duplicate parameter " + name);
  names_.push_back(name);
  return tensors_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::add_zeros(const std::string& name, std::vector<int> shape) {
  return insert(name, Tensor::zeros(std::move(shape)));
}

Tensor& ParamStore::add_full(const std::string& name, std::vector<int> shape,
                             double v) {
  return insert(name, Tensor::full(std::move(shape), v));
}

Tensor& ParamStore::add_uniform(const std::string& name, std::vector<int> shape,
                                int fan_in, std::uint64_t seed) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / fan_in);
  Rng rng(mix_seed(seed, hash_str(name)));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = rng.uniform(-bound, bound);
  return insert(name, std::move(t));
}

ag::BnState& ParamStore::add_bn_state(const std::string& name, int channels) {
  if (bn_.count(name))
    throw std::invalid_argument("duplicate norm state " + name);
  bn_names_.push_back(name);
  return bn_.emplace(name, ag::BnState(channels)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::invalid_argument("unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::invalid_argument("unknown parameter " + name);
  return it->second;
}

ag::BnState& ParamStore::bn_state(const std::string& name) {
  auto it = bn_.find(name);
  if (it == bn_.end())
    throw std::invalid_argument("unknown norm state " + name);
  return it->second;
}

const ag::BnState& ParamStore::bn_state(const std::string& name) const {
  auto it = bn_.find(name);
  if (it == bn_.end())
    throw std::invalid_argument("unknown norm state " + name);
  return it->second;
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [k, v] : tensors_) n += v.numel();
  return n;
}

ag::VarId TapeBind::operator[](const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  ag::VarId id = tape_.input(store_.get(name), requires_grad_);
  ids_.emplace(name, id);
  return id;
}

}  // namespace ostr
