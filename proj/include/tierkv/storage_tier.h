#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "tierkv/status.h"

namespace tierkv {

enum class TierId : uint8_t { kFD = 0, kSD = 1 };

inline const char* TierName(TierId t) { return t == TierId::kFD ? "fd" : "sd"; }

enum class FileKind : uint8_t { kData = 0, kRalt = 1 };

// Injected per-block latencies that emulate the fast/slow device gap.
struct TierProfile {
  std::chrono::nanoseconds read_latency{0};
  std::chrono::nanoseconds write_latency{0};
  std::string name;
};

struct IoStats {
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  uint64_t read_ops = 0;
  uint64_t write_ops = 0;
};

// A directory of sealed, immutable files on one storage tier. Every file is
// the caller's payload followed by a fixed seal footer. Thread-safe.
class StorageTier {
 public:
  // Latency is charged per started block of this many bytes.
  static constexpr size_t kLatencyBlockSize = 16 * 1024;
  // Seal footer: payload length (fixed64) + magic (fixed64).
  static constexpr size_t kSealFooterSize = 16;
  static constexpr uint64_t kSealMagic = 0x7469657266696c65ULL;  // "tierfile"

  static Status Open(const std::filesystem::path& root, TierId id, TierProfile profile,
                     std::unique_ptr<StorageTier>* out);

  ~StorageTier();
  StorageTier(const StorageTier&) = delete;
  StorageTier& operator=(const StorageTier&) = delete;

  // Creates and seals a new file. Writing a name that already exists is a
  // programming error and throws std::logic_error.
  Status WriteFile(FileKind kind, uint64_t number, std::string_view payload);

  // Reads the whole payload, verifying the seal footer.
  Status ReadFile(FileKind kind, uint64_t number, std::string* out);

  // Reads [offset, offset+n) of the payload.
  Status ReadRange(FileKind kind, uint64_t number, uint64_t offset, size_t n, std::string* out);

  Status DeleteFile(FileKind kind, uint64_t number);

  // Registers a sealed file already present in the directory (for example
  // one listed by a manifest written by an earlier process).
  Status AdoptFile(FileKind kind, uint64_t number);

  bool Exists(FileKind kind, uint64_t number) const;

  // On-disk size of a live file (payload + seal footer), 0 when unknown.
  uint64_t FileSize(FileKind kind, uint64_t number) const;

  // Sum of on-disk sizes of live files written through this handle.
  uint64_t LiveBytes() const { return live_bytes_.load(std::memory_order_relaxed); }

  // Totals across both file kinds, or restricted to one kind.
  IoStats stats() const;
  IoStats stats(FileKind kind) const;
  void ResetStats();

  TierId id() const { return id_; }
  const TierProfile& profile() const { return profile_; }
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path PathFor(FileKind kind, uint64_t number) const;

 private:
  StorageTier(std::filesystem::path root, TierId id, TierProfile profile);

  static uint64_t Key(FileKind kind, uint64_t number) {
    return (number << 1) | static_cast<uint64_t>(kind);
  }
  void InjectLatency(std::chrono::nanoseconds per_block, size_t bytes) const;
  Status GetFd(FileKind kind, uint64_t number, int* fd, uint64_t* disk_size);

  std::filesystem::path root_;
  TierId id_;
  TierProfile profile_;

  mutable std::shared_mutex files_mu_;
  struct OpenFile {
    int fd = -1;
    uint64_t disk_size = 0;
  };
  std::unordered_map<uint64_t, OpenFile> files_;

  struct Counters {
    std::atomic<uint64_t> bytes_read{0};
    std::atomic<uint64_t> bytes_written{0};
    std::atomic<uint64_t> read_ops{0};
    std::atomic<uint64_t> write_ops{0};
  };
  Counters counters_[2];
  std::atomic<uint64_t> live_bytes_{0};
};

}  // namespace tierkv
