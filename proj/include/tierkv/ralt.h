#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tierkv/autotune.h"
#include "tierkv/ralt_record.h"
#include "tierkv/status.h"
#include "tierkv/storage_tier.h"
#include "tierkv/table.h"

namespace tierkv {

struct RaltConfig {
  uint64_t hot_set_size_limit = 60ull << 20;
  uint64_t physical_size_limit = 4ull << 20;
  double alpha = 0.9;
  double evict_fraction = 0.10;
  uint64_t tick_advance_bytes = 90ull << 20;
  uint64_t unsorted_buffer_capacity = 1ull << 20;
  ScoringMethod scoring_method = ScoringMethod::kExpSmoothing;
  size_t sample_count = 10000;
  // Level 0 holds flushed runs; the last level is bounded by eviction only.
  int num_levels = 3;
  double level_size_ratio = 10.0;
  int l0_compaction_trigger = 4;
  size_t table_target_size = 256 << 10;
  size_t block_size = 8 << 10;
  // A probe may consult up to l0_compaction_trigger + num_levels - 1
  // filters, so each needs a much lower rate than an SSTable filter.
  int bloom_bits_per_key = 16;
  size_t max_tables_per_merge_step = 10;
  uint64_t seed = 0x52414c54;
  AutotuneParams autotune;
  // When false, flushes, compactions and evictions run inline on the thread
  // that fills the buffer. Tests use this for determinism.
  bool background = true;

  Status Validate() const;
};

// Score cut-offs, expressed at reference tick `ref_tick`.
struct ScoreThresholds {
  uint64_t ref_tick = 0;
  RankKey hot = RankKey::Lowest();       // rank >= hot: reported hot
  RankKey physical = RankKey::Lowest();  // rank < physical: dropped at eviction
};

struct RaltStats {
  uint64_t hot_size = 0;       // sum of per-table hot sizes (filtered records only)
  uint64_t physical_size = 0;  // sum of per-table encoded record sizes
  uint64_t estimated_hot_size = 0;
  uint64_t estimated_physical_size = 0;
  uint64_t hot_set_size_limit = 0;
  uint64_t physical_size_limit = 0;
  uint64_t tick = 0;
  uint32_t decay_epoch = 0;
  uint64_t logged_accesses = 0;
  uint64_t flushes = 0;
  uint64_t compactions = 0;
  uint64_t evictions = 0;
  uint64_t stable_hot_size = 0;
  uint64_t stable_physical_size = 0;
  uint64_t unstable_physical_size = 0;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  uint64_t live_file_bytes = 0;
  uint64_t peak_file_bytes = 0;
  size_t num_tables = 0;
};

struct HotEntry {
  std::string key;
  uint64_t hot_size = 0;
};

// One RALT file. The file is deleted when the last reference goes away.
struct RaltFile {
  std::shared_ptr<Table> table;
  StorageTier* tier = nullptr;
  std::atomic<uint64_t>* live_bytes = nullptr;
  uint64_t file_size = 0;
  uint64_t hot_size = 0;      // filtered records
  uint64_t all_hot_size = 0;  // every record
  uint64_t physical_size = 0;

  RaltFile() = default;
  RaltFile(const RaltFile&) = delete;
  RaltFile& operator=(const RaltFile&) = delete;
  ~RaltFile();
};

// A file as seen by one version: optionally only the keys after `after`.
// Stepwise merges leave partially consumed inputs in this form.
struct RaltTableRef {
  std::shared_ptr<RaltFile> file;
  std::optional<std::string> after;  // exclusive lower bound

  const std::string& largest() const { return file->table->largest(); }
  // Smallest key that may be visible through this ref (approximate when
  // restricted: the bound itself).
  std::string_view smallest() const {
    return after ? std::string_view(*after) : std::string_view(file->table->smallest());
  }
  bool Covers(std::string_view key) const {
    return (!after || key > *after) && key >= file->table->smallest() &&
           key <= file->table->largest();
  }
  // Sizes scaled to the visible part.
  uint64_t HotSize() const;
  uint64_t AllHotSize() const;
  uint64_t PhysicalSize() const;
  double VisibleFraction() const;
};

struct RaltVersion {
  // levels[0] holds overlapping runs; levels >= 1 are disjoint and sorted.
  std::vector<std::vector<RaltTableRef>> levels;
  int l0_runs = 0;
  ScoreThresholds thresholds;

  uint64_t HotSize() const;
  uint64_t PhysicalSize() const;
  uint64_t LevelPhysicalSize(int level) const;
  uint64_t LevelHotSize(int level) const;
  size_t NumTables() const;
};

// Key-ordered merged view of a set of refs. Each key is yielded once with
// all of its stored records merged.
class RaltMergedIterator {
 public:
  RaltMergedIterator(std::vector<RaltTableRef> refs, MergeParams params,
                     std::optional<std::string> lo = std::nullopt,
                     std::optional<std::string> hi = std::nullopt);

  bool Valid() const { return valid_; }
  void Next() { Advance(); }
  const RaltRecord& record() const { return record_; }
  Status status() const { return status_; }

 private:
  void Advance();

  std::vector<RaltTableRef> refs_;
  MergeParams params_;
  std::optional<std::string> hi_;
  std::unique_ptr<MergingIterator> iter_;
  RaltRecord record_;
  bool valid_ = false;
  Status status_;
};

// Ordered stream of hot keys in [lo, hi], judged by merged score.
class RaltHotIterator {
 public:
  RaltHotIterator(std::shared_ptr<const RaltVersion> version, MergeParams params, std::string lo,
                  std::string hi);

  bool Valid() const { return inner_.Valid(); }
  void Next();
  std::string_view key() const { return inner_.record().key; }
  uint64_t hot_size() const { return inner_.record().HotSize(); }
  const RaltRecord& record() const { return inner_.record(); }

 private:
  void SkipCold();

  std::shared_ptr<const RaltVersion> version_;
  MergeParams params_;
  RaltMergedIterator inner_;
};

// Hotness tracker: a small LSM-tree on the fast tier whose records hold
// per-key access scores rather than values.
class Ralt {
 public:
  Ralt(StorageTier* fd, RaltConfig config);
  ~Ralt();
  Ralt(const Ralt&) = delete;
  Ralt& operator=(const Ralt&) = delete;

  // Records one access to a key whose value is value_len bytes.
  void LogAccess(std::string_view key, uint64_t value_len);

  // In-memory filter check; never reads the disk.
  bool IsHot(std::string_view key) const;

  // Estimated hot size of keys in [lo, hi]. Overestimates when a key is
  // stored in several levels.
  uint64_t RangeHotSize(std::string_view lo, std::string_view hi) const;

  RaltHotIterator NewHotIterator(std::string lo, std::string hi) const;
  std::vector<HotEntry> CollectHot(std::string_view lo, std::string_view hi) const;

  // Seals the unsorted buffer and waits until all resulting work is done.
  void Flush();
  // Runs an eviction now. Busy if another one is running.
  Status Evict();

  // Writes `records` (sorted by key, unique) as a new run of `level`,
  // bypassing the buffer. Level 0 adds a run; other levels must be empty.
  Status IngestSortedRun(int level, const std::vector<RaltRecord>& records);

  void SetLimits(uint64_t hot_set_size_limit, uint64_t physical_size_limit);
  // Moves the logical clock forward by `ticks` slices.
  void AdvanceTick(uint64_t ticks);

  RaltStats GetStats() const;
  ScoreThresholds thresholds() const { return current()->thresholds; }
  std::shared_ptr<const RaltVersion> current() const;
  uint64_t current_tick() const { return tick_.load(std::memory_order_relaxed); }
  uint32_t decay_epoch() const { return epoch_.load(std::memory_order_relaxed); }
  uint64_t hot_set_size_limit() const { return hot_limit_.load(std::memory_order_relaxed); }
  uint64_t physical_size_limit() const { return physical_limit_.load(std::memory_order_relaxed); }
  const RaltConfig& config() const { return config_; }
  const MergeParams& merge_params() const { return merge_params_; }

  // Every stored record merged per key (diagnostics and tests).
  std::vector<RaltRecord> DumpMerged() const;

 private:
  using Transform = std::function<bool(RaltRecord*)>;

  void BackgroundLoop();
  void ProcessBuffer(std::vector<RaltRecord> records);
  Status FlushRecords(std::vector<RaltRecord> records);
  Status MaybeCompact();
  bool NeedsEviction() const;
  void MaybeEvict();
  Status EvictLocked();
  Status EvictClockLocked(const std::shared_ptr<const RaltVersion>& v);
  Status MergeLevels(const std::vector<int>& sources, int target, const ScoreThresholds& thr,
                     const Transform& transform);
  Status WriteRun(const std::vector<RaltRecord>& records, const ScoreThresholds& thr,
                  std::vector<RaltTableRef>* out);
  uint64_t LevelTarget(int level) const;
  void Install(std::shared_ptr<const RaltVersion> v);
  void NoteFraction(int level, uint64_t in_upper_hot, uint64_t in_lower_hot, uint64_t out_hot,
                    uint64_t in_upper_phys, uint64_t in_lower_phys, uint64_t out_phys);
  bool IsHotRecord(const RaltRecord& r, const ScoreThresholds& thr) const;

  class TableSink;

  StorageTier* fd_;
  RaltConfig config_;
  MergeParams merge_params_;

  mutable std::mutex version_mu_;
  std::shared_ptr<const RaltVersion> version_;

  std::mutex buffer_mu_;
  std::vector<RaltRecord> buffer_;
  uint64_t buffer_bytes_ = 0;
  uint64_t accessed_bytes_ = 0;
  uint64_t accessed_since_decay_ = 0;
  uint64_t access_clock_ = 0;
  std::atomic<uint64_t> tick_{0};
  std::atomic<uint32_t> epoch_{0};
  std::atomic<uint64_t> logged_accesses_{0};

  // Serializes structural changes (flush, compaction, eviction).
  std::mutex struct_mu_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::vector<RaltRecord>> pending_;
  bool working_ = false;
  bool stop_ = false;
  std::thread worker_;

  std::atomic<bool> evicting_{false};
  std::atomic<uint64_t> next_file_number_{1};
  std::atomic<uint64_t> hot_limit_;
  std::atomic<uint64_t> physical_limit_;
  std::atomic<uint64_t> flushes_{0};
  std::atomic<uint64_t> compactions_{0};
  std::atomic<uint64_t> evictions_{0};
  std::atomic<uint64_t> stable_hot_size_{0};
  std::atomic<uint64_t> stable_physical_size_{0};
  std::atomic<uint64_t> unstable_physical_size_{0};
  std::atomic<uint64_t> live_file_bytes_{0};
  std::atomic<uint64_t> peak_file_bytes_{0};

  // Guarded by struct_mu_.
  std::vector<double> hot_fraction_;   // per level: share of hot size not duplicated below
  std::vector<double> phys_fraction_;
  std::string clock_hand_;
  uint64_t eviction_seq_ = 0;
};

}  // namespace tierkv
