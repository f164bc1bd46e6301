#include "ostr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "ostr/error.hpp"
#include "ostr/rng.hpp"

namespace ostr {

namespace {

constexpr char kMagic[5] = {'O', 'S', 'T', 'R', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

void put_tensor(std::string& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
  for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(out, t[i]);
}

void put_name(std::string& out, const std::string& name) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  std::string name() {
    const std::uint32_t n = u32();
    if (n > 4096) throw std::runtime_error("checkpoint: implausible name length");
    return bytes(n);
  }
  Tensor tensor() {
    const std::uint32_t ndim = u32();
    if (ndim > 8) throw std::runtime_error("checkpoint: implausible rank");
    std::vector<int> shape;
    std::int64_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      const std::uint32_t d = u32();
      if (d == 0 || d > (1u << 24))
        throw std::runtime_error("checkpoint: implausible dimension");
      shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    Tensor t(shape);
    for (std::int64_t i = 0; i < numel; ++i) t[i] = f64();
    return t;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u64(out, static_cast<std::uint64_t>(ck.step));
  put_u64(out, hash_str(ck.config_text));
  put_u32(out, static_cast<std::uint32_t>(ck.config_text.size()));
  out.append(ck.config_text);

  put_u32(out, static_cast<std::uint32_t>(ck.params.names().size()));
  for (const std::string& name : ck.params.names()) {
    put_name(out, name);
    put_tensor(out, ck.params.get(name));
  }

  put_u32(out, static_cast<std::uint32_t>(ck.params.bn_names().size()));
  for (const std::string& name : ck.params.bn_names()) {
    const ag::BnState& bn = ck.params.bn_state(name);
    put_name(out, name);
    const int ch = static_cast<int>(bn.running_mean.numel());
    put_u32(out, static_cast<std::uint32_t>(ch));
    for (int i = 0; i < ch; ++i) put_f64(out, bn.running_mean[i]);
    for (int i = 0; i < ch; ++i) put_f64(out, bn.running_var[i]);
  }

  put_u32(out, static_cast<std::uint32_t>(ck.opt.grad_sq.size()));
  for (const auto& [name, g2] : ck.opt.grad_sq) {
    auto it = ck.opt.update_sq.find(name);
    if (it == ck.opt.update_sq.end())
      throw std::invalid_argument("save_checkpoint: optimizer state out of sync for " + name);
    put_name(out, name);
    put_tensor(out, g2);
    put_tensor(out, it->second);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DatasetWriteError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw DatasetWriteError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  Reader r{buf};
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw std::runtime_error("checkpoint: bad magic in " + path);

  Checkpoint ck;
  ck.step = static_cast<long long>(r.u64());
  const std::uint64_t want_hash = r.u64();
  ck.config_text = r.bytes(r.u32());
  if (hash_str(ck.config_text) != want_hash)
    throw std::runtime_error("checkpoint: config hash mismatch in " + path);

  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = r.name();
    Tensor t = r.tensor();
    Tensor& slot = ck.params.add_zeros(name, t.shape());
    slot = std::move(t);
  }

  const std::uint32_t n_bn = r.u32();
  for (std::uint32_t i = 0; i < n_bn; ++i) {
    const std::string name = r.name();
    const std::uint32_t ch = r.u32();
    if (ch == 0 || ch > (1u << 24))
      throw std::runtime_error("checkpoint: implausible channel count");
    ag::BnState& bn = ck.params.add_bn_state(name, static_cast<int>(ch));
    for (std::uint32_t c = 0; c < ch; ++c) bn.running_mean[c] = r.f64();
    for (std::uint32_t c = 0; c < ch; ++c) bn.running_var[c] = r.f64();
  }

  const std::uint32_t n_opt = r.u32();
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    const std::string name = r.name();
    ck.opt.grad_sq[name] = r.tensor();
    ck.opt.update_sq[name] = r.tensor();
  }

  if (r.pos != buf.size())
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return ck;
}

}  // namespace ostr
