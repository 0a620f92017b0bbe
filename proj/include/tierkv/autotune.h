#pragma once

#include <algorithm>
#include <cstdint>

namespace tierkv {

// Parameters of the stable/unstable counter scheme that sizes the hot set.
struct AutotuneParams {
  bool enabled = false;
  uint64_t l_hs = 0;  // lower bound of the hot-set limit, bytes
  uint64_t r_hs = 0;  // upper bound of the hot-set limit, bytes
  uint32_t delta_c = 1;
  uint32_t c_max = 10;
  uint64_t unstable_cap = 0;     // 0 means 0.05 * r_hs
  uint64_t decay_period = 0;     // R; 0 means r_hs
  double stability_margin = 1.1;
  uint32_t physical_update_every = 3;  // evictions between physical-limit updates

  // Defaults relative to the size of the last FD level.
  static AutotuneParams ForFdLastLevel(uint64_t fd_last_level_bytes) {
    AutotuneParams p;
    p.l_hs = static_cast<uint64_t>(0.05 * static_cast<double>(fd_last_level_bytes));
    p.r_hs = static_cast<uint64_t>(0.8 * static_cast<double>(fd_last_level_bytes));
    return p;
  }

  uint64_t EffectiveUnstableCap() const {
    return unstable_cap != 0 ? unstable_cap : static_cast<uint64_t>(0.05 * static_cast<double>(r_hs));
  }
  uint64_t EffectiveDecayPeriod() const { return decay_period != 0 ? decay_period : r_hs; }

  bool Valid() const { return l_hs > 0 && l_hs <= r_hs && delta_c >= 1 && c_max >= delta_c; }
};

// Aggregates gathered over one merged scan of RALT.
struct StabilityState {
  uint64_t total_stable_hot_size = 0;
  uint64_t total_stable_physical_size = 0;
  uint64_t total_unstable_physical_size = 0;
  uint64_t hot_size_accessed_since_decay = 0;
};

namespace autotune {

// Counter value after `decays` periodic decrements, floored at zero.
inline uint32_t EffectiveCounter(uint32_t stored, uint32_t record_epoch, uint32_t current_epoch) {
  const uint32_t elapsed = current_epoch >= record_epoch ? current_epoch - record_epoch : 0;
  return stored > elapsed ? stored - elapsed : 0;
}

inline bool IsStable(uint32_t effective_counter, bool tag) { return effective_counter > 0 && tag; }

// Fresh access with no prior record.
struct CounterState {
  uint32_t counter = 0;
  bool tag = false;
  uint32_t epoch = 0;
};

inline CounterState OnInsert(const AutotuneParams& p, uint32_t epoch) {
  return CounterState{p.delta_c, false, epoch};
}

// Two records of the same key met: the older one was hit by the newer access.
inline CounterState OnHit(const AutotuneParams& p, const CounterState& a, const CounterState& b) {
  const uint32_t epoch = std::max(a.epoch, b.epoch);
  const uint64_t sum = static_cast<uint64_t>(EffectiveCounter(a.counter, a.epoch, epoch)) +
                       EffectiveCounter(b.counter, b.epoch, epoch);
  return CounterState{static_cast<uint32_t>(std::min<uint64_t>(sum, p.c_max)), true, epoch};
}

inline uint64_t HotSetLimit(const AutotuneParams& p, uint64_t stable_hot_size) {
  const double want = p.stability_margin * static_cast<double>(stable_hot_size);
  return std::clamp(static_cast<uint64_t>(want), p.l_hs, p.r_hs);
}

inline uint64_t PhysicalLimit(const AutotuneParams& p, uint64_t stable_physical_size) {
  return stable_physical_size + p.EffectiveUnstableCap();
}

}  // namespace autotune
}  // namespace tierkv
