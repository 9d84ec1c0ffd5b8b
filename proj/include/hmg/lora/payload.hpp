#pragma once

// The 96-byte smart-meter record carried as FRMPayload. Big-endian layout:
//
//   [ 0.. 3] timestamp u32 (unix s)     [ 4.. 5] meter id u16
//   [ 6.. 7] frequency u16 (0.01 Hz)    [ 8]     status u8     [9] reserved u8
//   [10..27] point: V u32 (mV), I u32 (mA), P u32 (W), Q i32 (var), PF u16 (1e-4)
//   [28..43] WT  [44..59] PV  [60..75] MT  [76..91] FC
//            each: P u32 (W), Q i32 (var), V u32 (mV), I u32 (mA); all 0xFF = absent
//   [92..95] converter power i32 (W)

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmg::lora {

using Bytes = std::vector<std::uint8_t>;

enum class CodecErrorKind { kLength, kRange, kMalformed, kParameter, kIncomplete, kMixing, kDuplicate, kChecksum };

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CodecErrorKind kind() const { return kind_; }

 private:
  CodecErrorKind kind_;
};

inline constexpr std::size_t kReadingSize = 96;
inline constexpr std::size_t kBlockSize = 16;
inline constexpr std::uint32_t kAbsentPower = 0xFFFFFFFFu;

enum class Component { kWT = 0, kPV = 1, kMT = 2, kFC = 3 };
inline constexpr std::array<const char*, 4> kComponentNames = {"WT", "PV", "MT", "FC"};

struct PointMeasurement {
  std::uint32_t voltage_mv = 0;
  std::uint32_t current_ma = 0;
  std::uint32_t active_power_w = 0;
  std::int32_t reactive_power_var = 0;
  std::uint16_t power_factor_e4 = 0;  // 0..10000

  bool operator==(const PointMeasurement&) const = default;
};

struct ComponentBlock {
  std::uint32_t active_power_w = 0;
  std::int32_t reactive_power_var = 0;
  std::uint32_t voltage_mv = 0;
  std::uint32_t current_ma = 0;

  bool operator==(const ComponentBlock&) const = default;
};

/// Decoded meter record, held in wire units so the codec is exact.
struct MeterReading {
  std::uint32_t timestamp = 0;
  std::uint16_t meter_id = 0;
  std::uint16_t frequency_chz = 0;
  std::uint8_t status = 0;
  std::uint8_t reserved = 0;
  PointMeasurement point;
  std::array<std::optional<ComponentBlock>, 4> components;
  std::int32_t converter_w = 0;

  double frequency_hz() const { return frequency_chz / 100.0; }
  double power_factor() const { return point.power_factor_e4 / 10000.0; }
  std::optional<ComponentBlock>& component(Component c) { return components[static_cast<std::size_t>(c)]; }
  const std::optional<ComponentBlock>& component(Component c) const {
    return components[static_cast<std::size_t>(c)];
  }

  bool operator==(const MeterReading&) const = default;
};

namespace detail {

inline void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}
inline void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}
inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline constexpr std::size_t kPointOffset = 10;
inline constexpr std::size_t kBlockOffset = 28;
inline constexpr std::size_t kConverterOffset = 92;

}  // namespace detail

inline Bytes encode_reading(const MeterReading& r) {
  using namespace detail;
  if (r.point.power_factor_e4 > 10000)
    throw CodecError(CodecErrorKind::kRange, "encode: power_factor exceeds 1.0");
  Bytes out(kReadingSize, 0);
  auto* p = out.data();
  put_u32(p + 0, r.timestamp);
  put_u16(p + 4, r.meter_id);
  put_u16(p + 6, r.frequency_chz);
  p[8] = r.status;
  p[9] = r.reserved;
  auto* q = p + kPointOffset;
  put_u32(q + 0, r.point.voltage_mv);
  put_u32(q + 4, r.point.current_ma);
  put_u32(q + 8, r.point.active_power_w);
  put_u32(q + 12, static_cast<std::uint32_t>(r.point.reactive_power_var));
  put_u16(q + 16, r.point.power_factor_e4);
  for (std::size_t c = 0; c < 4; ++c) {
    auto* b = p + kBlockOffset + c * kBlockSize;
    const auto& blk = r.components[c];
    if (!blk) {
      std::fill(b, b + kBlockSize, std::uint8_t{0xFF});
      continue;
    }
    if (blk->active_power_w == kAbsentPower)
      throw CodecError(CodecErrorKind::kRange,
                       std::string("encode: ") + kComponentNames[c] + ".active_power_w collides with the absent sentinel");
    put_u32(b + 0, blk->active_power_w);
    put_u32(b + 4, static_cast<std::uint32_t>(blk->reactive_power_var));
    put_u32(b + 8, blk->voltage_mv);
    put_u32(b + 12, blk->current_ma);
  }
  put_u32(p + kConverterOffset, static_cast<std::uint32_t>(r.converter_w));
  return out;
}

inline MeterReading decode_reading(std::span<const std::uint8_t> bytes) {
  using namespace detail;
  if (bytes.size() != kReadingSize)
    throw CodecError(CodecErrorKind::kLength,
                     "decode: expected 96 bytes, got " + std::to_string(bytes.size()));
  const auto* p = bytes.data();
  MeterReading r;
  r.timestamp = get_u32(p + 0);
  r.meter_id = get_u16(p + 4);
  r.frequency_chz = get_u16(p + 6);
  r.status = p[8];
  r.reserved = p[9];
  const auto* q = p + kPointOffset;
  r.point.voltage_mv = get_u32(q + 0);
  r.point.current_ma = get_u32(q + 4);
  r.point.active_power_w = get_u32(q + 8);
  r.point.reactive_power_var = static_cast<std::int32_t>(get_u32(q + 12));
  r.point.power_factor_e4 = get_u16(q + 16);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto* b = p + kBlockOffset + c * kBlockSize;
    if (get_u32(b) == kAbsentPower) {
      for (std::size_t k = 4; k < kBlockSize; ++k)
        if (b[k] != 0xFF)
          throw CodecError(CodecErrorKind::kMalformed,
                           std::string("decode: ") + kComponentNames[c] + " block has the absent sentinel but byte " +
                               std::to_string(kBlockOffset + c * kBlockSize + k) + " is not 0xFF");
      continue;
    }
    r.components[c] = ComponentBlock{get_u32(b), static_cast<std::int32_t>(get_u32(b + 4)), get_u32(b + 8),
                                     get_u32(b + 12)};
  }
  r.converter_w = static_cast<std::int32_t>(get_u32(p + kConverterOffset));
  return r;
}

/// Names of decoded fields that hold an all-ones sentinel or an out-of-range
/// value (e.g. every point field of a saturated 0xFF frame).
inline std::vector<std::string> invalid_fields(const MeterReading& r) {
  std::vector<std::string> out;
  if (r.timestamp == 0xFFFFFFFFu) out.emplace_back("timestamp");
  if (r.meter_id == 0xFFFF) out.emplace_back("meter_id");
  if (r.frequency_chz == 0xFFFF) out.emplace_back("frequency");
  if (r.point.voltage_mv == 0xFFFFFFFFu) out.emplace_back("point.voltage");
  if (r.point.current_ma == 0xFFFFFFFFu) out.emplace_back("point.current");
  if (r.point.active_power_w == 0xFFFFFFFFu) out.emplace_back("point.active_power");
  if (r.point.power_factor_e4 > 10000) out.emplace_back("point.power_factor");
  return out;
}

}  // namespace hmg::lora
