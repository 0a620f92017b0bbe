#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tierkv/autotune.h"
#include "tierkv/ralt.h"
#include "tierkv/status.h"
#include "tierkv/storage_tier.h"

namespace tierkv {

// Level geometry across the two tiers. Level 0 and levels 1..fd_levels live
// on FD, the following sd_levels on SD; the last level is unbounded.
struct LevelLayout {
  int fd_levels = 2;
  int sd_levels = 2;
  uint64_t fd_last_level_target = 90ull << 20;
  uint64_t sd_first_level_target = 0;  // 0 means fd_last_level_target
  double size_ratio = 10.0;

  int num_levels() const { return 1 + fd_levels + sd_levels; }
  int fd_last_level() const { return fd_levels; }
  int sd_first_level() const { return fd_levels + 1; }
  int bottommost_level() const { return fd_levels + sd_levels; }
  TierId TierOf(int level) const { return level <= fd_levels ? TierId::kFD : TierId::kSD; }
  uint64_t EffectiveSdFirstTarget() const {
    return sd_first_level_target != 0 ? sd_first_level_target : fd_last_level_target;
  }
  // Target size of a level >= 1. The bottommost level has no target.
  uint64_t Target(int level) const;

  Status Validate() const;
};

enum class AccessOriginKind : uint8_t { kMemtable, kFdLevel, kPromotionCache, kSdLevel, kNotFound };

struct AccessOrigin {
  AccessOriginKind kind = AccessOriginKind::kNotFound;
  int level = -1;  // for FD/SD levels

  bool fast() const {
    return kind == AccessOriginKind::kMemtable || kind == AccessOriginKind::kFdLevel ||
           kind == AccessOriginKind::kPromotionCache;
  }
};

struct DBOptions {
  std::filesystem::path fd_path;
  std::filesystem::path sd_path;
  TierProfile fd_profile{std::chrono::nanoseconds(0), std::chrono::nanoseconds(0), "fd"};
  TierProfile sd_profile{std::chrono::nanoseconds(0), std::chrono::nanoseconds(0), "sd"};

  LevelLayout layout;
  size_t memtable_size = 4 << 20;
  size_t target_file_size = 4 << 20;
  int max_immutable_memtables = 4;  // writers stall beyond this
  int l0_compaction_trigger = 4;
  int l0_stop_writes_trigger = 16;
  int background_threads = 4;
  bool disable_auto_compactions = false;

  // Hotness tracking and promotion.
  RaltConfig ralt;
  size_t promotion_cache_seal_bytes = 4 << 20;
  bool enable_retention = true;
  bool enable_promotion_by_compaction = true;
  bool enable_promotion_by_flush = true;
  // Promote every SD read without asking RALT.
  bool promote_accessed = false;
  // Log FD and promotion-cache hits to RALT. Off only for hotness-free
  // baselines.
  bool enable_ralt = true;

  // Fills in values that depend on others (RALT tick length, auto-tuning
  // bounds) for a layout. Call after adjusting the layout.
  void Finalize();
  Status Validate() const;
};

}  // namespace tierkv
