#include "smtc/semcom.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "smtc/errors.hpp"

namespace smtc {

std::string_view obs_mode_name(ObsMode mode) {
  return mode == ObsMode::Image ? "image" : "semantic";
}

ObsMode parse_obs_mode(std::string_view text) {
  if (text == "image") return ObsMode::Image;
  if (text == "semantic") return ObsMode::Semantic;
  throw ConfigError("obs_mode", "expected image|semantic, got '" + std::string(text) + "'");
}

RawPayload encode_raw(const Image& image, Phase phase) {
  if (image.pixels.size() != Image::kBytes) {
    throw ShapeError("image has " + std::to_string(image.pixels.size()) + " bytes");
  }
  RawPayload payload;
  payload.bytes.reserve(kRawPayloadBytes);
  payload.bytes.push_back(static_cast<std::uint8_t>(phase_index(phase)));
  payload.bytes.insert(payload.bytes.end(), image.pixels.begin(), image.pixels.end());
  if (payload.bytes.size() != kRawPayloadBytes) throw std::logic_error("raw payload length");
  return payload;
}

DecodedRaw decode_raw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kRawPayloadBytes) {
    throw MalformedPayload("raw payload must be " + std::to_string(kRawPayloadBytes) +
                           " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes[0] > 3) throw MalformedPayload("phase byte out of range");
  DecodedRaw out;
  out.phase = static_cast<Phase>(bytes[0]);
  std::copy(bytes.begin() + 1, bytes.end(), out.image.pixels.begin());
  return out;
}

namespace {

void put_f32(std::uint8_t* dst, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) dst[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

float get_f32(const std::uint8_t* src) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(src[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

SemanticPayload encode_semantic(const SemanticVector& vec) {
  SemanticPayload payload;
  for (std::size_t i = 0; i < 4; ++i) put_f32(payload.bytes.data() + 4 * i, vec.positions[i]);
  put_f32(payload.bytes.data() + 16, vec.phase_index);
  return payload;
}

SemanticVector decode_semantic(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kSemanticPayloadBytes) {
    throw MalformedPayload("semantic payload must be " + std::to_string(kSemanticPayloadBytes) +
                           " bytes, got " + std::to_string(bytes.size()));
  }
  SemanticVector vec;
  for (std::size_t i = 0; i < 4; ++i) vec.positions[i] = get_f32(bytes.data() + 4 * i);
  vec.phase_index = get_f32(bytes.data() + 16);
  return vec;
}

double tx_latency(std::uint64_t payload_bytes, const LinkModel& link) {
  if (!(link.rate_bps > 0.0)) throw ConfigError("rate_bps", "must be positive");
  return static_cast<double>(payload_bytes + link.overhead_bytes) * 8.0 / link.rate_bps;
}

std::uint64_t payload_bytes_per_step(ObsMode mode) {
  return mode == ObsMode::Image ? kRawPayloadBytes : kSemanticPayloadBytes;
}

CommReport comm_report(std::uint64_t steps, ObsMode mode) {
  CommReport report;
  report.per_step_bytes = payload_bytes_per_step(mode);
  report.total_bytes = steps * report.per_step_bytes;
  report.reduction_vs_raw = 1.0 - static_cast<double>(report.per_step_bytes) /
                                      static_cast<double>(kRawPayloadBytes);
  return report;
}

}  // namespace smtc
