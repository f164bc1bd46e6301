#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ostr {

// Strict UTF-8: rejects truncated sequences, overlong encodings, surrogates,
// and values beyond U+10FFFF.
std::vector<std::uint32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<std::uint32_t>& cps);
void utf8_append(std::string& out, std::uint32_t cp);

}  // namespace ostr
