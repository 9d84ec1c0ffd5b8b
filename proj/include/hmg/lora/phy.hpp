#pragma once

// Structural model of the radio frame: preamble length, the 20-bit explicit
// header, the payload, and the optional 16-bit payload CRC.
//
// Explicit PHDR on the wire (3 bytes, the last 4 bits are padding):
//   byte 0: payload length
//   byte 1: coding rate (3 bits) | CRC present (1 bit) | reserved (4 bits)
//   byte 2: header CRC-4 (4 bits) | 0000

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <boost/crc.hpp>

#include "hmg/lora/payload.hpp"

namespace hmg::lora {

struct Phdr {
  std::uint8_t payload_length = 0;
  std::uint8_t coding_rate = 1;  // 1..4 meaning 4/5..4/8
  bool crc_present = true;
  std::uint8_t phdr_crc = 0;     // 4 bits

  bool operator==(const Phdr&) const = default;
};

struct PhyFrame {
  std::uint16_t preamble_symbols = 8;
  bool explicit_header = true;
  Phdr phdr;
  Bytes payload;
  std::optional<std::uint16_t> phy_crc;

  bool operator==(const PhyFrame&) const = default;
};

inline std::uint8_t header_crc4(std::uint8_t b0, std::uint8_t b1) {
  boost::crc_optimal<4, 0x3, 0, 0, false, false> crc;
  const std::uint8_t data[2] = {b0, b1};
  crc.process_bytes(data, 2);
  return static_cast<std::uint8_t>(crc.checksum() & 0xF);
}

inline std::uint16_t payload_crc16(std::span<const std::uint8_t> payload) {
  boost::crc_ccitt_type crc;
  crc.process_bytes(payload.data(), payload.size());
  return static_cast<std::uint16_t>(crc.checksum());
}

/// Uplinks carry the payload CRC; downlinks do not.
inline PhyFrame make_phy_frame(std::span<const std::uint8_t> payload, bool with_crc, bool explicit_header = true,
                               std::uint8_t coding_rate = 1) {
  if (payload.size() > 255) throw CodecError(CodecErrorKind::kParameter, "phy: payload exceeds 255 bytes");
  if (coding_rate < 1 || coding_rate > 4) throw CodecError(CodecErrorKind::kParameter, "phy: coding rate outside 1..4");
  PhyFrame f;
  f.explicit_header = explicit_header;
  f.phdr.payload_length = static_cast<std::uint8_t>(payload.size());
  f.phdr.coding_rate = coding_rate;
  f.phdr.crc_present = with_crc;
  const auto b1 = static_cast<std::uint8_t>(coding_rate << 5 | (with_crc ? 0x10 : 0));
  f.phdr.phdr_crc = header_crc4(f.phdr.payload_length, b1);
  f.payload.assign(payload.begin(), payload.end());
  if (with_crc) f.phy_crc = payload_crc16(payload);
  return f;
}

inline Bytes serialize(const PhyFrame& f) {
  Bytes out;
  if (f.explicit_header) {
    out.push_back(f.phdr.payload_length);
    out.push_back(static_cast<std::uint8_t>((f.phdr.coding_rate & 7u) << 5 | (f.phdr.crc_present ? 0x10 : 0)));
    out.push_back(static_cast<std::uint8_t>((f.phdr.phdr_crc & 0xFu) << 4));
  }
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  if (f.phy_crc) {
    out.push_back(static_cast<std::uint8_t>(*f.phy_crc >> 8));
    out.push_back(static_cast<std::uint8_t>(*f.phy_crc));
  }
  return out;
}

/// Parses a frame with an explicit header. Header fields, both CRCs, and the
/// declared length are all checked against the buffer.
inline PhyFrame parse_explicit(std::span<const std::uint8_t> bytes, std::uint16_t preamble_symbols = 8) {
  if (bytes.size() < 3) throw CodecError(CodecErrorKind::kLength, "phy: shorter than PHDR");
  PhyFrame f;
  f.preamble_symbols = preamble_symbols;
  f.explicit_header = true;
  f.phdr.payload_length = bytes[0];
  f.phdr.coding_rate = static_cast<std::uint8_t>(bytes[1] >> 5);
  f.phdr.crc_present = (bytes[1] & 0x10) != 0;
  f.phdr.phdr_crc = static_cast<std::uint8_t>(bytes[2] >> 4);
  if ((bytes[1] & 0x0F) || (bytes[2] & 0x0F)) throw CodecError(CodecErrorKind::kMalformed, "phy: reserved bits set");
  if (f.phdr.coding_rate < 1 || f.phdr.coding_rate > 4)
    throw CodecError(CodecErrorKind::kMalformed, "phy: coding rate outside 1..4");
  if (header_crc4(bytes[0], bytes[1]) != f.phdr.phdr_crc)
    throw CodecError(CodecErrorKind::kChecksum, "phy: header CRC mismatch");
  const std::size_t need = 3 + f.phdr.payload_length + (f.phdr.crc_present ? 2 : 0);
  if (bytes.size() != need)
    throw CodecError(CodecErrorKind::kLength,
                     "phy: expected " + std::to_string(need) + " bytes, got " + std::to_string(bytes.size()));
  f.payload.assign(bytes.begin() + 3, bytes.begin() + 3 + f.phdr.payload_length);
  if (f.phdr.crc_present) {
    const auto crc = static_cast<std::uint16_t>(bytes[need - 2] << 8 | bytes[need - 1]);
    if (crc != payload_crc16(f.payload)) throw CodecError(CodecErrorKind::kChecksum, "phy: payload CRC mismatch");
    f.phy_crc = crc;
  }
  return f;
}

/// Implicit-header frames carry no PHDR and no payload CRC; the receiver
/// knows the length and coding rate in advance.
inline PhyFrame parse_implicit(std::span<const std::uint8_t> bytes, std::uint8_t expected_length,
                               std::uint8_t coding_rate = 1, std::uint16_t preamble_symbols = 8) {
  if (bytes.size() != expected_length)
    throw CodecError(CodecErrorKind::kLength, "phy: implicit frame length " + std::to_string(bytes.size()) +
                                                  " differs from configured " + std::to_string(expected_length));
  auto f = make_phy_frame(bytes, false, false, coding_rate);
  f.preamble_symbols = preamble_symbols;
  return f;
}

}  // namespace hmg::lora
