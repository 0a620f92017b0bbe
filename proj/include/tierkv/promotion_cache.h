#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tierkv/version.h"

namespace tierkv {

struct PromotionEntry {
  std::string value;
  uint64_t seqno = 0;
};

// A sealed promotion cache waiting for the Checker.
struct ImmutablePromotionCache {
  uint64_t id = 0;
  std::map<std::string, PromotionEntry, std::less<>> entries;
  // Keys written (sealed in a memtable) or promoted elsewhere after this
  // cache was sealed. Only grows; guarded by the cache lock.
  std::set<std::string, std::less<>> updated;
  std::shared_ptr<const SuperVersion> snapshot;
  uint64_t bytes = 0;
};

enum class InsertResult { kInserted, kAborted, kFull };

// Staging area for records read from SD. Logically sits between the last FD
// level and the first SD level.
//
// Lock order: DB mutex, then this cache's lock. Methods documented as
// "caller holds the DB mutex" take the cache lock themselves.
class PromotionCache {
 public:
  explicit PromotionCache(size_t seal_bytes) : seal_bytes_(seal_bytes) {}

  // Mutable cache first, then sealed caches newest first. Keys in a sealed
  // cache's updated set are invisible.
  bool Get(std::string_view key, std::string* value, uint64_t* seqno) const;

  // Source tables are those whose range contained the key when it was read
  // from SD; `read_epoch` is CompactionEpoch() sampled before the reader
  // pinned its superversion. Aborts if a source table has been picked by a
  // compaction, or if a compaction into SD that started after read_epoch
  // covers the key.
  InsertResult TryInsert(std::string_view key, std::string_view value, uint64_t seqno,
                         const std::vector<FileMetaPtr>& sources, uint64_t read_epoch);

  uint64_t CompactionEpoch() const { return sd_epoch_.load(std::memory_order_acquire); }

  // Marks compaction inputs (caller holds the DB mutex). When the job writes
  // into SD its range is logged so that in-flight readers cannot insert
  // versions it may supersede.
  void MarkCompaction(const std::vector<FileMetaPtr>& inputs, bool into_sd, std::string_view lo,
                      std::string_view hi);

  // Removes mutable entries in [lo, hi] and copies sealed ones, adding their
  // keys to the sealed caches' updated sets (caller holds the DB mutex).
  std::vector<std::pair<std::string, PromotionEntry>> Extract(std::string_view lo,
                                                             std::string_view hi);

  bool NeedsSeal() const { return mutable_bytes_.load(std::memory_order_relaxed) >= seal_bytes_; }
  // Seals the mutable cache (caller holds the DB mutex). Returns nullptr when
  // it is empty.
  std::shared_ptr<ImmutablePromotionCache> Seal(std::shared_ptr<const SuperVersion> snapshot);

  // Caller holds the DB mutex.
  void RecordUpdatedKeys(const std::vector<std::string>& keys);
  // Drops entries whose keys are in the cache's updated set. Caller holds
  // the DB mutex.
  void FilterUpdated(const ImmutablePromotionCache& ipc,
                     std::vector<std::pair<std::string, PromotionEntry>>* entries) const;
  void RemoveImmutable(uint64_t id);

  size_t mutable_bytes() const { return mutable_bytes_.load(std::memory_order_relaxed); }
  size_t num_immutable() const;
  size_t seal_bytes() const { return seal_bytes_; }
  uint64_t inserts() const { return inserts_.load(std::memory_order_relaxed); }
  uint64_t aborts() const { return aborts_.load(std::memory_order_relaxed); }

 private:
  static constexpr size_t kEpochLogCapacity = 1 << 14;
  struct LoggedCompaction {
    uint64_t epoch;
    std::string lo;
    std::string hi;
  };

  const size_t seal_bytes_;
  mutable std::shared_mutex mu_;
  std::map<std::string, PromotionEntry, std::less<>> mutable_;
  std::atomic<size_t> mutable_bytes_{0};
  std::vector<std::shared_ptr<ImmutablePromotionCache>> immutables_;  // newest first
  std::deque<LoggedCompaction> sd_log_;
  std::atomic<uint64_t> sd_epoch_{0};
  uint64_t next_id_ = 1;
  std::atomic<uint64_t> inserts_{0};
  std::atomic<uint64_t> aborts_{0};
};

}  // namespace tierkv
