#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tierkv/options.h"
#include "tierkv/status.h"
#include "tierkv/storage_tier.h"

namespace tierkv {

constexpr int kMaxLevels = 16;

// Point-in-time copy of every counter a run reports.
struct RunMetrics {
  // Gets by origin.
  uint64_t gets = 0;
  uint64_t get_memtable = 0;
  uint64_t get_promotion_cache = 0;
  uint64_t get_fd_levels = 0;
  uint64_t get_sd_levels = 0;
  uint64_t get_not_found = 0;
  std::array<uint64_t, kMaxLevels> get_level{};  // FD and SD levels by index

  uint64_t puts = 0;
  uint64_t deletes = 0;
  uint64_t user_bytes_written = 0;

  uint64_t promoted_bytes_flush = 0;
  uint64_t promoted_bytes_compaction = 0;
  uint64_t retained_bytes = 0;
  uint64_t cache_inserts = 0;
  uint64_t cache_insert_aborts = 0;

  uint64_t flush_bytes_written = 0;
  uint64_t flushes = 0;
  uint64_t compactions = 0;
  // Output bytes of compactions, by the tier they were written to.
  std::array<uint64_t, 2> compaction_bytes_written{};
  std::array<uint64_t, 2> compaction_bytes_read{};
  // Compactions from the last FD level into SD.
  uint64_t inter_tier_compactions = 0;
  uint64_t inter_tier_input_fd_bytes = 0;
  uint64_t inter_tier_bytes_to_sd = 0;
  uint64_t inter_tier_bytes_to_fd = 0;

  std::array<IoStats, 2> tier_io{};  // data files only
  uint64_t ralt_bytes_io = 0;
  uint64_t ralt_hot_set_limit = 0;
  uint64_t ralt_physical_limit = 0;
  uint64_t ralt_hot_size = 0;
  uint64_t ralt_physical_size = 0;

  // Filled by the benchmark driver.
  double duration_seconds = 0;
  double window_seconds = 0;
  std::vector<double> ops_per_sec;
  std::vector<double> hit_rate_series;
  double stable_hit_rate = 0;
  uint64_t stable_start_window = 0;
  double get_latency_p50_us = 0;
  double get_latency_p99_us = 0;
  double get_latency_p999_us = 0;

  uint64_t fd_hits() const;
  double fd_hit_rate() const;
  uint64_t compaction_bytes_written_total() const {
    return compaction_bytes_written[0] + compaction_bytes_written[1];
  }
  // Compaction bytes written per user byte written.
  double write_amplification() const;
  // Bytes written by inter-tier compactions per FD-last-level byte they
  // consumed.
  double inter_tier_write_amplification() const;

  // Counter-wise difference (for run-phase deltas). Series are taken from
  // *this.
  RunMetrics Minus(const RunMetrics& base) const;
};

// Line-delimited key=value records followed by a summary block.
std::string FormatReport(const RunMetrics& m);
std::string FormatSummary(const RunMetrics& m);
Status WriteReport(const std::filesystem::path& path, const RunMetrics& m);

}  // namespace tierkv
