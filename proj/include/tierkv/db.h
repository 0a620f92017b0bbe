#pragma once

#include <array>
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

#include "tierkv/metrics.h"
#include "tierkv/options.h"
#include "tierkv/promotion_cache.h"
#include "tierkv/ralt.h"
#include "tierkv/status.h"
#include "tierkv/storage_tier.h"
#include "tierkv/version.h"

namespace tierkv {

// Two-tier leveled LSM-tree with hotness-driven promotion and retention.
//
// Put and Delete may be called from several threads; they serialize on an
// internal writer lock. Get is concurrent and reads a pinned superversion.
class DB {
 public:
  static Status Open(const DBOptions& options, std::unique_ptr<DB>* out);

  ~DB();
  DB(const DB&) = delete;
  DB& operator=(const DB&) = delete;

  Status Put(std::string_view key, std::string_view value);
  Status Delete(std::string_view key);
  // NotFound when the key is absent or deleted.
  Status Get(std::string_view key, std::string* value, AccessOrigin* origin = nullptr);

  // Seals the memtable and waits until every immutable memtable is on disk.
  Status Flush();
  // Seals a non-empty mutable promotion cache and hands it to the Checker.
  void SealPromotionCache();
  // Blocks until no flush, compaction or Checker work remains.
  void WaitForIdle();
  // Runs one compaction out of `level` on the calling thread, regardless of
  // level pressure. NotFound when the level has nothing compactable.
  Status CompactLevel(int level);
  // Flushes memtables, drains background work and writes the manifest.
  // Further calls return OK.
  Status Close();

  void PauseBackgroundWork();
  void ContinueBackgroundWork();

  RunMetrics GetMetrics() const;
  std::shared_ptr<const SuperVersion> GetSuperVersion() const;
  uint64_t last_sequence() const { return last_seq_.load(std::memory_order_acquire); }

  const DBOptions& options() const { return options_; }
  Ralt* ralt() { return ralt_.get(); }
  PromotionCache* promotion_cache() { return &pc_; }
  StorageTier* tier(TierId id) { return id == TierId::kFD ? fd_.get() : sd_.get(); }

  // Called between a successful SD read and the promotion-cache insert.
  // Tests use it to script interleavings.
  void SetSdReadHook(std::function<void(std::string_view key)> hook);

 private:
  struct CompactionJob;
  struct OutputFile;

  explicit DB(const DBOptions& options);

  Status OpenImpl();
  Status Recover();
  Status WriteManifestLocked();

  Status Write(std::string_view key, ValueKind kind, std::string_view value);
  void MaybeStallLocked(std::unique_lock<std::mutex>& lock);
  void SwitchMemtableLocked();
  void InstallLocked(std::shared_ptr<MemTable> mem, std::vector<std::shared_ptr<MemTable>> imms,
                     std::shared_ptr<const Version> version);

  bool GetFromTables(const SuperVersion& sv, std::string_view key, std::string* value,
                     AccessOrigin* origin, uint64_t read_epoch, bool* deleted, Status* status);
  void MaybePromote(std::string_view key, std::string_view value, uint64_t seqno,
                    std::vector<FileMetaPtr> sources, uint64_t read_epoch);
  void LogAccess(std::string_view key, size_t value_len);
  void SealPromotionCacheImpl(bool force);
  bool NewerExists(const SuperVersion& sv, std::string_view key, uint64_t seqno) const;

  // Background scheduling (callers hold mu_).
  void MaybeScheduleLocked();
  void Submit(std::function<void()> fn);
  void WorkerLoop();
  void BackgroundFlush();
  void BackgroundCompaction(std::unique_ptr<CompactionJob> job);
  void CheckerLoop();
  void CheckSealed(const std::shared_ptr<ImmutablePromotionCache>& ipc);

  Status FlushMemTable(const MemTable& mem, FileMetaPtr* out);
  std::unique_ptr<CompactionJob> PickCompactionLocked(int only_level);
  std::unique_ptr<CompactionJob> SetupJobLocked(int level, std::vector<FileMetaPtr> upper,
                                                std::vector<FileMetaPtr> lower);
  Status RunCompaction(CompactionJob* job);
  void FinishCompactionLocked(CompactionJob* job, const Status& s);
  double LevelScoreLocked(const Version& v, int level) const;

  Status NewTableFile(TierId tier, int level, const std::string& payload,
                      const std::string& smallest, const std::string& largest,
                      uint64_t num_entries, FileMetaPtr* out);
  uint64_t NextFileNumber() { return next_file_.fetch_add(1); }

  DBOptions options_;
  std::unique_ptr<StorageTier> fd_;
  std::unique_ptr<StorageTier> sd_;
  std::unique_ptr<Ralt> ralt_;
  PromotionCache pc_;

  // The DB mutex: guards installs, scheduling state and sealing.
  mutable std::mutex mu_;
  std::condition_variable bg_cv_;
  std::mutex write_mu_;

  std::shared_ptr<const SuperVersion> sv_;  // guarded by sv_mu_
  mutable std::mutex sv_mu_;
  uint64_t sv_number_ = 0;

  std::atomic<uint64_t> last_seq_{0};
  std::atomic<uint64_t> next_file_{1};
  std::atomic<uint64_t> next_memtable_id_{1};
  std::atomic<uint64_t> creation_order_{1};

  // Scheduling state (mu_).
  bool closed_ = false;
  bool shutting_down_ = false;
  int paused_ = 0;
  bool flush_running_ = false;
  bool l0_compaction_running_ = false;
  int running_compactions_ = 0;
  // Key ranges being written into each level by running jobs.
  std::vector<std::vector<std::pair<std::string, std::string>>> busy_ranges_;
  Status bg_error_;

  std::mutex pool_mu_;
  std::condition_variable pool_cv_;
  std::deque<std::function<void()>> pool_queue_;
  std::vector<std::thread> workers_;
  bool pool_stop_ = false;

  std::mutex checker_mu_;
  std::condition_variable checker_cv_;
  std::deque<std::shared_ptr<ImmutablePromotionCache>> checker_queue_;
  bool checker_busy_ = false;
  bool checker_stop_ = false;
  std::thread checker_;

  std::function<void(std::string_view)> sd_read_hook_;
  std::mutex hook_mu_;

  struct Counters {
    std::atomic<uint64_t> gets{0};
    std::atomic<uint64_t> get_memtable{0};
    std::atomic<uint64_t> get_promotion_cache{0};
    std::atomic<uint64_t> get_fd_levels{0};
    std::atomic<uint64_t> get_sd_levels{0};
    std::atomic<uint64_t> get_not_found{0};
    std::array<std::atomic<uint64_t>, kMaxLevels> get_level{};
    std::atomic<uint64_t> puts{0};
    std::atomic<uint64_t> deletes{0};
    std::atomic<uint64_t> user_bytes_written{0};
    std::atomic<uint64_t> promoted_bytes_flush{0};
    std::atomic<uint64_t> promoted_bytes_compaction{0};
    std::atomic<uint64_t> retained_bytes{0};
    std::atomic<uint64_t> flushes{0};
    std::atomic<uint64_t> flush_bytes_written{0};
    std::atomic<uint64_t> compactions{0};
    std::array<std::atomic<uint64_t>, 2> compaction_bytes_written{};
    std::array<std::atomic<uint64_t>, 2> compaction_bytes_read{};
    std::atomic<uint64_t> inter_tier_compactions{0};
    std::atomic<uint64_t> inter_tier_input_fd_bytes{0};
    std::atomic<uint64_t> inter_tier_bytes_to_sd{0};
    std::atomic<uint64_t> inter_tier_bytes_to_fd{0};
  };
  Counters counters_;
};

}  // namespace tierkv
