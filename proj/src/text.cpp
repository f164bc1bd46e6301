#include "ostr/text.hpp"

#include <stdexcept>

namespace ostr {

std::vector<std::uint32_t> utf8_decode(const std::string& s) {
  std::vector<std::uint32_t> out;
  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  const std::size_t n = s.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = p[i];
    std::uint32_t cp;
    int extra;
    std::uint32_t min_cp;
    if (c < 0x80) {
      cp = c;
      extra = 0;
      min_cp = 0;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      extra = 1;
      min_cp = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      extra = 2;
      min_cp = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      extra = 3;
      min_cp = 0x10000;
    } else {
      throw std::invalid_argument("invalid UTF-8 lead byte");
    }
    if (extra > 0 && i + extra >= n)
      throw std::invalid_argument("truncated UTF-8 sequence");
    for (int k = 1; k <= extra; ++k) {
      const unsigned char cc = p[i + k];
      if ((cc & 0xC0) != 0x80)
        throw std::invalid_argument("invalid UTF-8 continuation byte");
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (extra > 0 && cp < min_cp)
      throw std::invalid_argument("overlong UTF-8 encoding");
    if (cp >= 0xD800 && cp <= 0xDFFF)
      throw std::invalid_argument("UTF-8 surrogate code point");
    if (cp > 0x10FFFF) throw std::invalid_argument("code point out of range");
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

void utf8_append(std::string& out, std::uint32_t cp) {
  if (cp >= 0xD800 && cp <= 0xDFFF)
    throw std::invalid_argument("cannot encode surrogate");
  if (cp > 0x10FFFF) throw std::invalid_argument("code point out of range");
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string utf8_encode(const std::vector<std::uint32_t>& cps) {
  std::string out;
  for (auto cp : cps) utf8_append(out, cp);
  return out;
}

}  // namespace ostr
