#pragma once

// Splitting of the meter record into short packets for the high spreading
// factors, and the matching reassembly.
//
// Fragment identifier (2 bytes, big-endian):
//   bits 15..6 sequence id, 5..4 fragment index, 3..2 fragment total, 1..0 reserved (0)

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmg/lora/payload.hpp"

namespace hmg::lora {

inline constexpr std::size_t kFragmentData = 49;
inline constexpr std::size_t kFragmentHeader = 2;
inline constexpr std::size_t kMaxPacket = kFragmentHeader + kFragmentData;
inline constexpr std::size_t kMaxFragmentedPayload = kReadingSize;

inline bool fragments_at(int spreading_factor) {
  if (spreading_factor < 6 || spreading_factor > 12)
    throw CodecError(CodecErrorKind::kParameter,
                     "spreading factor " + std::to_string(spreading_factor) + " outside 6..12");
  return spreading_factor >= 9;
}

struct FragmentId {
  std::uint16_t sequence = 0;  // 10 bits
  std::uint8_t index = 0;      // 2 bits
  std::uint8_t total = 0;      // 2 bits

  std::uint16_t pack() const {
    return static_cast<std::uint16_t>(((sequence & 0x3FFu) << 6) | ((index & 3u) << 4) | ((total & 3u) << 2));
  }
  static FragmentId unpack(std::uint16_t v) {
    if (v & 3u) throw CodecError(CodecErrorKind::kMalformed, "fragment id: reserved bits set");
    return {static_cast<std::uint16_t>(v >> 6), static_cast<std::uint8_t>((v >> 4) & 3u),
            static_cast<std::uint8_t>((v >> 2) & 3u)};
  }
};

inline std::vector<Bytes> fragment(std::span<const std::uint8_t> payload, int spreading_factor,
                                   std::uint16_t sequence = 0) {
  if (!fragments_at(spreading_factor)) return {Bytes(payload.begin(), payload.end())};
  if (payload.size() > kMaxFragmentedPayload)
    throw CodecError(CodecErrorKind::kParameter,
                     "fragment: payload of " + std::to_string(payload.size()) + " bytes exceeds 96");
  if (sequence > 0x3FF) throw CodecError(CodecErrorKind::kParameter, "fragment: sequence id exceeds 10 bits");
  const std::size_t total = std::max<std::size_t>(1, (payload.size() + kFragmentData - 1) / kFragmentData);
  std::vector<Bytes> out;
  for (std::size_t i = 0; i < total; ++i) {
    const auto begin = i * kFragmentData;
    const auto end = std::min(payload.size(), begin + kFragmentData);
    const auto id = FragmentId{sequence, static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(total)}.pack();
    Bytes pkt{static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id)};
    pkt.insert(pkt.end(), payload.begin() + static_cast<std::ptrdiff_t>(begin),
               payload.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(pkt));
  }
  return out;
}

inline FragmentId fragment_id(std::span<const std::uint8_t> packet) {
  if (packet.size() < kFragmentHeader)
    throw CodecError(CodecErrorKind::kMalformed, "fragment shorter than its identifier");
  return FragmentId::unpack(static_cast<std::uint16_t>((packet[0] << 8) | packet[1]));
}

/// Inverse of fragment(); packets may arrive in any order.
inline Bytes reassemble(std::span<const Bytes> packets, int spreading_factor) {
  if (!fragments_at(spreading_factor)) {
    if (packets.size() != 1)
      throw CodecError(packets.empty() ? CodecErrorKind::kIncomplete : CodecErrorKind::kDuplicate,
                       "reassemble: expected exactly one packet at SF " + std::to_string(spreading_factor));
    return packets[0];
  }
  if (packets.empty()) throw CodecError(CodecErrorKind::kIncomplete, "reassemble: no packets");
  const auto first = fragment_id(packets[0]);
  if (first.total == 0) throw CodecError(CodecErrorKind::kMalformed, "reassemble: fragment total is zero");
  std::vector<const Bytes*> slot(first.total, nullptr);
  for (const auto& pkt : packets) {
    if (pkt.size() > kMaxPacket) throw CodecError(CodecErrorKind::kMalformed, "reassemble: packet exceeds 51 bytes");
    const auto id = fragment_id(pkt);
    if (id.sequence != first.sequence || id.total != first.total)
      throw CodecError(CodecErrorKind::kMixing, "reassemble: fragments from different payloads (sequence " +
                                                    std::to_string(first.sequence) + " vs " +
                                                    std::to_string(id.sequence) + ")");
    if (id.index >= id.total) throw CodecError(CodecErrorKind::kMalformed, "reassemble: fragment index out of range");
    if (slot[id.index])
      throw CodecError(CodecErrorKind::kDuplicate, "reassemble: duplicate fragment " + std::to_string(id.index));
    slot[id.index] = &pkt;
  }
  std::string missing;
  for (std::size_t i = 0; i < slot.size(); ++i)
    if (!slot[i]) missing += (missing.empty() ? "" : ",") + std::to_string(i);
  if (!missing.empty()) throw CodecError(CodecErrorKind::kIncomplete, "reassemble: missing fragment(s) " + missing);
  Bytes out;
  for (std::size_t i = 0; i < slot.size(); ++i) {
    const auto data = slot[i]->size() - kFragmentHeader;
    if (i + 1 < slot.size() && data != kFragmentData)
      throw CodecError(CodecErrorKind::kMalformed, "reassemble: short non-final fragment " + std::to_string(i));
    out.insert(out.end(), slot[i]->begin() + kFragmentHeader, slot[i]->end());
  }
  if (out.size() > kMaxFragmentedPayload)
    throw CodecError(CodecErrorKind::kMalformed, "reassemble: payload exceeds 96 bytes");
  return out;
}

}  // namespace hmg::lora
