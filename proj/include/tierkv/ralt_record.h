#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tierkv/autotune.h"
#include "tierkv/coding.h"

namespace tierkv {

enum class ScoringMethod : uint8_t { kExpSmoothing = 0, kLRU = 1, kClock = 2 };

// One access-history record of RALT. The value of the tracked record is not
// stored, only its length.
//
// On-disk encoding (what "physical size" measures):
//   fixed32 key_len | key | fixed64 packed | fixed64 tick | double score
// packed = value_len (low 32 bits) | counter << 32 (8 bits) | tag << 40 |
//          decay epoch << 41 (23 bits)
struct RaltRecord {
  std::string key;
  uint64_t value_len = 0;
  uint64_t tick = 0;
  double score = 0.0;
  uint32_t counter = 0;
  bool tag = false;
  uint32_t epoch = 0;

  static constexpr size_t kFixedPayloadSize = 24;
  static constexpr uint32_t kEpochMask = (1u << 23) - 1;

  uint64_t HotSize() const { return value_len + key.size(); }
  uint64_t PhysicalSize() const { return 4 + key.size() + kFixedPayloadSize; }

  // Fixed-width part stored as the table value.
  std::string EncodePayload() const {
    std::string out;
    out.reserve(kFixedPayloadSize);
    uint64_t packed = (value_len & 0xffffffffULL) | (static_cast<uint64_t>(counter & 0xff) << 32) |
                      (static_cast<uint64_t>(tag ? 1 : 0) << 40) |
                      (static_cast<uint64_t>(epoch & kEpochMask) << 41);
    PutFixed64(&out, packed);
    PutFixed64(&out, tick);
    PutDouble(&out, score);
    return out;
  }

  std::string Encode() const {
    std::string out;
    PutFixed32(&out, static_cast<uint32_t>(key.size()));
    out.append(key);
    out.append(EncodePayload());
    return out;
  }

  static RaltRecord DecodePayload(std::string_view key, std::string_view payload) {
    RaltRecord r;
    r.key.assign(key);
    const uint64_t packed = DecodeFixed64(payload.data());
    r.value_len = packed & 0xffffffffULL;
    r.counter = static_cast<uint32_t>((packed >> 32) & 0xff);
    r.tag = ((packed >> 40) & 1) != 0;
    r.epoch = static_cast<uint32_t>(packed >> 41) & kEpochMask;
    r.tick = DecodeFixed64(payload.data() + 8);
    r.score = DecodeDouble(payload.data() + 16);
    return r;
  }
};

struct MergeParams {
  ScoringMethod method = ScoringMethod::kExpSmoothing;
  double alpha = 0.9;
  AutotuneParams autotune;
};

// Combines two access histories of the same key. Commutative.
inline RaltRecord MergeRecords(const RaltRecord& a, const RaltRecord& b, const MergeParams& p) {
  if (a.key != b.key) throw std::logic_error("MergeRecords: key mismatch");
  const bool a_older = a.tick < b.tick || (a.tick == b.tick && a.value_len < b.value_len);
  const RaltRecord& older = a_older ? a : b;
  const RaltRecord& newer = a_older ? b : a;
  RaltRecord out;
  out.key = a.key;
  out.tick = newer.tick;
  out.value_len = newer.value_len;
  switch (p.method) {
    case ScoringMethod::kExpSmoothing:
      out.score = std::pow(p.alpha, static_cast<double>(newer.tick - older.tick)) * older.score +
                  newer.score;
      break;
    case ScoringMethod::kLRU:
      out.score = std::max(a.score, b.score);
      break;
    case ScoringMethod::kClock:
      out.score = std::min(a.score + b.score, static_cast<double>(std::numeric_limits<uint32_t>::max()));
      break;
  }
  auto c = autotune::OnHit(p.autotune, {a.counter, a.tag, a.epoch}, {b.counter, b.tag, b.epoch});
  out.counter = c.counter;
  out.tag = c.tag;
  out.epoch = c.epoch;
  return out;
}

// Ordering key used for thresholds: score, then a key hash so that equal
// scores still split deterministically.
struct RankKey {
  double score = 0.0;
  uint64_t tiebreak = 0;

  auto operator<=>(const RankKey&) const = default;

  static RankKey Lowest() { return {-std::numeric_limits<double>::infinity(), 0}; }
  static RankKey Highest() {
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<uint64_t>::max()};
  }
};

// Score of a stored record expressed at reference tick `ref_tick`. For
// exponential smoothing this is score * alpha^(ref_tick - tick); the other
// methods do not decay.
inline double ScoreAt(const RaltRecord& r, uint64_t ref_tick, const MergeParams& p) {
  if (p.method != ScoringMethod::kExpSmoothing) return r.score;
  const double d = static_cast<double>(ref_tick) - static_cast<double>(r.tick);
  return r.score * std::pow(p.alpha, d);
}

inline RankKey RankOf(const RaltRecord& r, uint64_t ref_tick, const MergeParams& p) {
  return RankKey{ScoreAt(r, ref_tick, p), HashBytes(r.key, 0x5eed)};
}

}  // namespace tierkv
