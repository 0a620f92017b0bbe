#include "tierkv/options.h"

#include <cmath>

namespace tierkv {

uint64_t LevelLayout::Target(int level) const {
  if (level <= 0 || level >= bottommost_level()) return 0;
  if (level <= fd_levels) {
    double t = static_cast<double>(fd_last_level_target);
    for (int l = fd_levels; l > level; --l) t /= size_ratio;
    return static_cast<uint64_t>(t);
  }
  double t = static_cast<double>(EffectiveSdFirstTarget());
  for (int l = sd_first_level(); l < level; ++l) t *= size_ratio;
  return static_cast<uint64_t>(t);
}

Status LevelLayout::Validate() const {
  if (fd_levels < 1) return Status::InvalidArgument("fd_levels must be >= 1");
  if (sd_levels < 1) return Status::InvalidArgument("sd_levels must be >= 1");
  if (!(size_ratio > 1.0)) return Status::InvalidArgument("size_ratio must be > 1");
  if (fd_last_level_target == 0) return Status::InvalidArgument("fd_last_level_target is zero");
  return Status::OK();
}

void DBOptions::Finalize() {
  // One tick per FD-last-level worth of accessed hot data.
  ralt.tick_advance_bytes = layout.fd_last_level_target;
  if (ralt.autotune.enabled && (ralt.autotune.l_hs == 0 || ralt.autotune.r_hs == 0)) {
    AutotuneParams bounds = AutotuneParams::ForFdLastLevel(layout.fd_last_level_target);
    if (ralt.autotune.l_hs == 0) ralt.autotune.l_hs = bounds.l_hs;
    if (ralt.autotune.r_hs == 0) ralt.autotune.r_hs = bounds.r_hs;
  }
}

Status DBOptions::Validate() const {
  if (fd_path.empty() || sd_path.empty()) return Status::InvalidArgument("tier paths required");
  if (fd_path == sd_path) return Status::InvalidArgument("tiers must use distinct directories");
  Status s = layout.Validate();
  if (!s.ok()) return s;
  if (memtable_size == 0 || target_file_size == 0) {
    return Status::InvalidArgument("memtable_size and target_file_size must be positive");
  }
  if (max_immutable_memtables < 1) return Status::InvalidArgument("max_immutable_memtables < 1");
  if (l0_compaction_trigger < 1 || l0_stop_writes_trigger < l0_compaction_trigger) {
    return Status::InvalidArgument("bad L0 triggers");
  }
  if (background_threads < 2) return Status::InvalidArgument("background_threads must be >= 2");
  if (promotion_cache_seal_bytes == 0) return Status::InvalidArgument("seal bytes is zero");
  return ralt.Validate();
}

}  // namespace tierkv
