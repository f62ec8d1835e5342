#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "smtc/perception.hpp"
#include "smtc/sim.hpp"

namespace smtc {

enum class ObsMode : std::uint8_t { Image = 0, Semantic = 1 };
std::string_view obs_mode_name(ObsMode mode);
/// Accepts "image" or "semantic"; throws ConfigError otherwise.
ObsMode parse_obs_mode(std::string_view text);

// [phase u8][128*64*3 image bytes]
inline constexpr std::size_t kRawPayloadBytes = Image::kBytes + 1;
// five little-endian binary32 values: pos_N, pos_E, pos_S, pos_W, phase_index
inline constexpr std::size_t kSemanticPayloadBytes = 5 * sizeof(float);
static_assert(kRawPayloadBytes == 24577);
static_assert(kSemanticPayloadBytes == 20);

struct RawPayload {
  std::vector<std::uint8_t> bytes;
};

struct SemanticPayload {
  std::array<std::uint8_t, kSemanticPayloadBytes> bytes{};
};

struct DecodedRaw {
  Image image;
  Phase phase = Phase::NsGreen;
};

RawPayload encode_raw(const Image& image, Phase phase);
DecodedRaw decode_raw(std::span<const std::uint8_t> bytes);

SemanticPayload encode_semantic(const SemanticVector& vec);
SemanticVector decode_semantic(std::span<const std::uint8_t> bytes);

struct LinkModel {
  double rate_bps = 1e5;
  std::uint64_t overhead_bytes = 0;
};

/// (payload + overhead) * 8 / rate, in seconds.
double tx_latency(std::uint64_t payload_bytes, const LinkModel& link);

std::uint64_t payload_bytes_per_step(ObsMode mode);

struct CommReport {
  std::uint64_t total_bytes = 0;
  std::uint64_t per_step_bytes = 0;
  double reduction_vs_raw = 0.0;  // 1 - per_step / raw per_step
};

CommReport comm_report(std::uint64_t steps, ObsMode mode);

}  // namespace smtc
