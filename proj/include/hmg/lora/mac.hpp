#pragma once

// MAC and application layers: MHDR, FHDR, FPort, FRMPayload encryption and
// the 4-byte MIC. Multi-byte header fields are little-endian on the air.
//
//   PHYPayload = MHDR(1) | MACPayload | MIC(4)
//   MACPayload = FHDR(7..22) | [FPort(1) | FRMPayload]
//   FHDR       = DevAddr(4) | FCtrl(1) | FCnt(2) | FOpts(0..15)

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmg/lora/crypto.hpp"
#include "hmg/lora/payload.hpp"

namespace hmg::lora {

enum class MType : std::uint8_t {
  kJoinRequest = 0,
  kJoinAccept = 1,
  kUnconfirmedDataUp = 2,
  kUnconfirmedDataDown = 3,
  kConfirmedDataUp = 4,
  kConfirmedDataDown = 5,
  kRfu = 6,
  kProprietary = 7,
};

inline const char* to_string(MType t) {
  static constexpr const char* kNames[] = {"join-request",         "join-accept",        "unconfirmed-data-up",
                                           "unconfirmed-data-down", "confirmed-data-up",  "confirmed-data-down",
                                           "rfu",                   "proprietary"};
  return kNames[static_cast<int>(t) & 7];
}

inline bool is_data(MType t) { return t >= MType::kUnconfirmedDataUp && t <= MType::kConfirmedDataDown; }

enum class Direction : std::uint8_t { kUplink = 0, kDownlink = 1 };

inline Direction direction_of(MType t) {
  return (t == MType::kUnconfirmedDataDown || t == MType::kConfirmedDataDown || t == MType::kJoinAccept)
             ? Direction::kDownlink
             : Direction::kUplink;
}

struct Mhdr {
  MType mtype = MType::kUnconfirmedDataUp;
  std::uint8_t rfu = 0;    // 3 bits
  std::uint8_t major = 0;  // 2 bits

  std::uint8_t pack() const {
    return static_cast<std::uint8_t>((static_cast<unsigned>(mtype) & 7u) << 5 | (rfu & 7u) << 2 | (major & 3u));
  }
  static Mhdr unpack(std::uint8_t b) {
    return {static_cast<MType>(b >> 5), static_cast<std::uint8_t>((b >> 2) & 7u), static_cast<std::uint8_t>(b & 3u)};
  }
  bool operator==(const Mhdr&) const = default;
};

enum class PortClass { kMacCommand, kApplication, kTest, kDiscard };

inline PortClass classify_port(std::uint8_t fport) {
  if (fport == 0) return PortClass::kMacCommand;
  if (fport <= 223) return PortClass::kApplication;
  if (fport == 224) return PortClass::kTest;
  return PortClass::kDiscard;
}

inline const char* to_string(PortClass c) {
  switch (c) {
    case PortClass::kMacCommand: return "mac-command";
    case PortClass::kApplication: return "application";
    case PortClass::kTest: return "test";
    case PortClass::kDiscard: return "discard";
  }
  return "?";
}

struct Fhdr {
  std::uint32_t dev_addr = 0;
  std::uint8_t fctrl_flags = 0;  // upper nibble of FCtrl; the low nibble is the FOpts length
  std::uint16_t fcnt = 0;
  Bytes fopts;

  bool operator==(const Fhdr&) const = default;
};

/// Cleartext application frame.
struct AppFrame {
  Fhdr fhdr;
  std::optional<std::uint8_t> fport;
  Bytes frm_payload;

  bool operator==(const AppFrame&) const = default;
};

/// Frame as transmitted: header, encrypted MAC payload, and MIC.
struct MacFrame {
  Mhdr mhdr;
  Bytes mac_payload;
  std::array<std::uint8_t, 4> mic{};

  Bytes serialize() const {
    Bytes out{mhdr.pack()};
    out.insert(out.end(), mac_payload.begin(), mac_payload.end());
    out.insert(out.end(), mic.begin(), mic.end());
    return out;
  }
  static MacFrame parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 5) throw CodecError(CodecErrorKind::kLength, "mac frame shorter than MHDR + MIC");
    MacFrame f;
    f.mhdr = Mhdr::unpack(bytes[0]);
    f.mac_payload.assign(bytes.begin() + 1, bytes.end() - 4);
    std::copy(bytes.end() - 4, bytes.end(), f.mic.begin());
    return f;
  }
};

struct SessionKeys {
  Key128 nwk_s_key{};
  Key128 app_s_key{};
};

namespace detail {

inline void put_le32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

/// Keystream block A_i = 0x01 | 0^4 | Dir | DevAddr | FCnt32 | 0x00 | i.
inline Block counter_block(Direction dir, std::uint32_t dev_addr, std::uint32_t fcnt, std::uint8_t i) {
  Block a{};
  a[0] = 0x01;
  a[5] = static_cast<std::uint8_t>(dir);
  put_le32(&a[6], dev_addr);
  put_le32(&a[10], fcnt);
  a[15] = i;
  return a;
}

/// XORs `data` with the AES keystream starting at block index `first`.
inline Bytes apply_keystream(const Key128& key, Direction dir, std::uint32_t dev_addr, std::uint32_t fcnt,
                             std::span<const std::uint8_t> data, std::uint8_t first) {
  Bytes out(data.begin(), data.end());
  for (std::size_t off = 0, k = 0; off < out.size(); off += 16, ++k) {
    const auto s = aes128_encrypt(key, counter_block(dir, dev_addr, fcnt, static_cast<std::uint8_t>(first + k)));
    for (std::size_t j = 0; j < 16 && off + j < out.size(); ++j) out[off + j] ^= s[j];
  }
  return out;
}

inline std::array<std::uint8_t, 4> compute_mic(const Key128& nwk, Direction dir, std::uint32_t dev_addr,
                                               std::uint32_t fcnt, std::span<const std::uint8_t> msg) {
  Bytes b0(16, 0);
  b0[0] = 0x49;
  b0[5] = static_cast<std::uint8_t>(dir);
  put_le32(&b0[6], dev_addr);
  put_le32(&b0[10], fcnt);
  b0[15] = static_cast<std::uint8_t>(msg.size());
  b0.insert(b0.end(), msg.begin(), msg.end());
  const auto full = aes_cmac(nwk, b0);
  return {full[0], full[1], full[2], full[3]};
}

struct ParsedMacPayload {
  Fhdr fhdr;
  std::optional<std::uint8_t> fport;
  Bytes frm_payload;
};

inline ParsedMacPayload parse_mac_payload(std::span<const std::uint8_t> p) {
  if (p.size() < 7) throw CodecError(CodecErrorKind::kLength, "MACPayload shorter than FHDR");
  ParsedMacPayload out;
  out.fhdr.dev_addr = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                      std::uint32_t{p[3]} << 24;
  const std::uint8_t fctrl = p[4];
  out.fhdr.fctrl_flags = fctrl & 0xF0;
  out.fhdr.fcnt = static_cast<std::uint16_t>(p[5] | p[6] << 8);
  const std::size_t fopts_len = fctrl & 0x0F;
  if (p.size() < 7 + fopts_len) throw CodecError(CodecErrorKind::kLength, "FOpts run past the end of MACPayload");
  out.fhdr.fopts.assign(p.begin() + 7, p.begin() + 7 + static_cast<std::ptrdiff_t>(fopts_len));
  const std::size_t rest = 7 + fopts_len;
  if (p.size() > rest) {
    out.fport = p[rest];
    out.frm_payload.assign(p.begin() + static_cast<std::ptrdiff_t>(rest) + 1, p.end());
  }
  return out;
}

}  // namespace detail

inline constexpr std::size_t kMaxMacMessage = 255 - 4;

/// Encrypts FOpts (network key, block index 0) and FRMPayload (application
/// key for FPort > 0, network key for FPort 0, block indices from 1), then
/// appends the CMAC-based MIC over MHDR | FHDR | FPort | ciphertext.
inline MacFrame seal(const AppFrame& app, const SessionKeys& keys, Direction dir, bool confirmed = false) {
  if (app.fhdr.fopts.size() > 15) throw CodecError(CodecErrorKind::kParameter, "seal: FOpts longer than 15 bytes");
  if (app.fhdr.fctrl_flags & 0x0F) throw CodecError(CodecErrorKind::kParameter, "seal: FCtrl flags overlap FOptsLen");
  if (!app.fport && !app.frm_payload.empty())
    throw CodecError(CodecErrorKind::kParameter, "seal: FRMPayload without FPort");
  if (app.fport && *app.fport == 0 && !app.fhdr.fopts.empty())
    throw CodecError(CodecErrorKind::kParameter, "seal: MAC commands in both FOpts and FRMPayload");
  MacFrame f;
  f.mhdr.mtype = dir == Direction::kUplink ? (confirmed ? MType::kConfirmedDataUp : MType::kUnconfirmedDataUp)
                                           : (confirmed ? MType::kConfirmedDataDown : MType::kUnconfirmedDataDown);
  const auto& h = app.fhdr;
  Bytes& p = f.mac_payload;
  p.resize(7);
  detail::put_le32(p.data(), h.dev_addr);
  p[4] = static_cast<std::uint8_t>(h.fctrl_flags | h.fopts.size());
  p[5] = static_cast<std::uint8_t>(h.fcnt);
  p[6] = static_cast<std::uint8_t>(h.fcnt >> 8);
  const auto fopts = detail::apply_keystream(keys.nwk_s_key, dir, h.dev_addr, h.fcnt, h.fopts, 0);
  p.insert(p.end(), fopts.begin(), fopts.end());
  if (app.fport) {
    p.push_back(*app.fport);
    const auto& k = *app.fport == 0 ? keys.nwk_s_key : keys.app_s_key;
    const auto ct = detail::apply_keystream(k, dir, h.dev_addr, h.fcnt, app.frm_payload, 1);
    p.insert(p.end(), ct.begin(), ct.end());
  }
  if (1 + p.size() > kMaxMacMessage) throw CodecError(CodecErrorKind::kParameter, "seal: frame exceeds 255 bytes");
  Bytes msg{f.mhdr.pack()};
  msg.insert(msg.end(), p.begin(), p.end());
  f.mic = detail::compute_mic(keys.nwk_s_key, dir, h.dev_addr, h.fcnt, msg);
  return f;
}

enum class OpenStatus { kAccepted, kMicMismatch, kDiscarded, kNotData, kMalformed };

inline const char* to_string(OpenStatus s) {
  switch (s) {
    case OpenStatus::kAccepted: return "accepted";
    case OpenStatus::kMicMismatch: return "mic-mismatch";
    case OpenStatus::kDiscarded: return "discarded";
    case OpenStatus::kNotData: return "not-data";
    case OpenStatus::kMalformed: return "malformed";
  }
  return "?";
}

/// Outcome of receiving a frame. Only kAccepted carries a decrypted frame.
struct OpenResult {
  OpenStatus status = OpenStatus::kMalformed;
  std::optional<AppFrame> frame;
  std::optional<PortClass> port_class;
  std::string detail;

  bool accepted() const { return status == OpenStatus::kAccepted; }
};

/// Verifies the MIC before anything else is interpreted: DevAddr and FCnt sit
/// at fixed offsets, so a corrupted FCtrl or MType is caught by the MIC rather
/// than by the parser. Frames that authenticate but are not data frames are
/// reported as kNotData.
inline OpenResult open(const MacFrame& f, const SessionKeys& keys) {
  OpenResult r;
  const auto& p = f.mac_payload;
  if (p.size() < 7 || 1 + p.size() > kMaxMacMessage) {
    r.status = OpenStatus::kMalformed;
    r.detail = "MACPayload length " + std::to_string(p.size()) + " outside 7..250";
    return r;
  }
  const std::uint32_t dev_addr = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                                 std::uint32_t{p[3]} << 24;
  const auto fcnt = static_cast<std::uint16_t>(p[5] | p[6] << 8);
  const auto dir = direction_of(f.mhdr.mtype);
  Bytes msg{f.mhdr.pack()};
  msg.insert(msg.end(), p.begin(), p.end());
  if (detail::compute_mic(keys.nwk_s_key, dir, dev_addr, fcnt, msg) != f.mic) {
    r.status = OpenStatus::kMicMismatch;
    r.detail = "MIC verification failed; frame dropped";
    return r;
  }
  if (!is_data(f.mhdr.mtype)) {
    r.status = OpenStatus::kNotData;
    r.detail = to_string(f.mhdr.mtype);
    return r;
  }
  detail::ParsedMacPayload parsed;
  try {
    parsed = detail::parse_mac_payload(p);
  } catch (const CodecError& e) {
    r.status = OpenStatus::kMalformed;
    r.detail = e.what();
    return r;
  }
  const auto& h = parsed.fhdr;
  if (parsed.fport) {
    r.port_class = classify_port(*parsed.fport);
    if (*r.port_class == PortClass::kDiscard) {
      r.status = OpenStatus::kDiscarded;
      r.detail = "FPort " + std::to_string(*parsed.fport) + " is reserved";
      return r;
    }
  }
  AppFrame app;
  app.fhdr = h;
  app.fhdr.fopts = detail::apply_keystream(keys.nwk_s_key, dir, h.dev_addr, h.fcnt, h.fopts, 0);
  app.fport = parsed.fport;
  if (parsed.fport) {
    const auto& k = *parsed.fport == 0 ? keys.nwk_s_key : keys.app_s_key;
    app.frm_payload = detail::apply_keystream(k, dir, h.dev_addr, h.fcnt, parsed.frm_payload, 1);
  }
  r.status = OpenStatus::kAccepted;
  r.frame = std::move(app);
  return r;
}

/// Receives raw bytes; never throws on malformed input.
inline OpenResult open_bytes(std::span<const std::uint8_t> bytes, const SessionKeys& keys) {
  if (bytes.size() < 5 || bytes.size() > 255) {
    OpenResult r;
    r.status = OpenStatus::kMalformed;
    r.detail = "frame length " + std::to_string(bytes.size()) + " outside 5..255";
    return r;
  }
  return open(MacFrame::parse(bytes), keys);
}

}  // namespace hmg::lora
