#pragma once

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "hmg/lora/payload.hpp"

namespace hmg::lora {

inline std::string to_hex(std::span<const std::uint8_t> bytes, bool spaced = false) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (spaced && i) out += (i % 16 == 0) ? '\n' : ' ';
    out += kDigits[bytes[i] >> 4];
    out += kDigits[bytes[i] & 15];
  }
  return out;
}

/// Parses hex digits, ignoring whitespace and '#' comments to end of line.
inline Bytes from_hex(std::string_view text) {
  Bytes out;
  int hi = -1;
  bool comment = false;
  for (char ch : text) {
    if (comment) {
      comment = ch != '\n';
      continue;
    }
    if (ch == '#') {
      comment = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    int v;
    if (ch >= '0' && ch <= '9') v = ch - '0';
    else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
    else throw CodecError(CodecErrorKind::kMalformed, std::string("hex: unexpected character '") + ch + "'");
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<std::uint8_t>(hi << 4 | v));
      hi = -1;
    }
  }
  if (hi >= 0) throw CodecError(CodecErrorKind::kMalformed, "hex: odd number of digits");
  return out;
}

}  // namespace hmg::lora
