#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tierkv/memtable.h"
#include "tierkv/storage_tier.h"
#include "tierkv/table.h"

namespace tierkv {

// Metadata of one data table. Shared by every version listing it; the file
// is deleted once the table is obsolete and no version references it.
struct FileMeta {
  uint64_t number = 0;
  TierId tier = TierId::kFD;
  int level = 0;
  std::string smallest;
  std::string largest;
  uint64_t file_size = 0;
  uint64_t num_entries = 0;
  uint64_t creation_order = 0;
  // Set when a compaction picks the table; never cleared while it is live.
  std::atomic<bool> compaction_mark{false};
  // Scheduling flag: inputs of a running job. Cleared if the job fails.
  std::atomic<bool> being_compacted{false};
  std::atomic<bool> obsolete{false};
  std::shared_ptr<Table> table;
  StorageTier* storage = nullptr;

  FileMeta() = default;
  FileMeta(const FileMeta&) = delete;
  FileMeta& operator=(const FileMeta&) = delete;
  ~FileMeta();

  bool Overlaps(std::string_view lo, std::string_view hi) const {
    return !(largest < lo || smallest > hi);
  }
};

using FileMetaPtr = std::shared_ptr<FileMeta>;

struct Version {
  // levels[0] may overlap; levels >= 1 are sorted by key and disjoint.
  std::vector<std::vector<FileMetaPtr>> levels;

  uint64_t LevelBytes(int level) const;
  std::vector<FileMetaPtr> Overlapping(int level, std::string_view lo, std::string_view hi) const;
  // Table of a level >= 1 whose range contains key, or nullptr.
  const FileMetaPtr* FindFile(int level, std::string_view key) const;
  // Checks the ordering invariant of levels >= 1.
  bool LevelsDisjoint() const;
};

// Reference-counted read view: memtables plus the table layout.
struct SuperVersion {
  std::shared_ptr<MemTable> mem;
  std::vector<std::shared_ptr<MemTable>> imms;  // newest first
  std::shared_ptr<const Version> version;
  uint64_t number = 0;
};

}  // namespace tierkv
