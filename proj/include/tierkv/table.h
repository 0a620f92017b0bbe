#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tierkv/bloom.h"
#include "tierkv/iterator.h"
#include "tierkv/status.h"
#include "tierkv/storage_tier.h"

namespace tierkv {

// Sorted-table container shared by data tables and RALT tables.
//
// Payload layout (the storage tier appends its own seal footer):
//
//   [data block]*  [filter]  [index block]  [footer: kTableFooterSize bytes]
//
// Data block entry:  fixed32 key_len | key | value
//   value is fixed32 value_len | bytes, or exactly fixed_value_size bytes
//   when the table was built with a fixed value width.
// Index block:       fixed32 count | count * (fixed32 len | first_key |
//                    fixed64 offset | fixed32 size | fixed64 aux_prefix)
//                    | fixed32 len | last_key
// Footer:            fixed64 index_offset | fixed64 index_size |
//                    fixed64 filter_offset | fixed64 filter_size |
//                    fixed64 num_entries | fixed32 fixed_value_size |
//                    fixed32 kind | fixed64 aux_total | fixed64 magic
//
// aux_prefix is the sum of per-entry aux weights of all earlier blocks; RALT
// uses it to answer range hot-size queries from the index alone.
constexpr size_t kTableFooterSize = 64;
constexpr uint64_t kTableMagic = 0x31307473736b7674ULL;  // format version 1

struct TableOptions {
  size_t block_size = 16 * 1024;
  int bloom_bits_per_key = 10;
  uint32_t fixed_value_size = 0;
};

struct IndexEntry {
  std::string first_key;
  uint64_t offset = 0;
  uint32_t size = 0;
  uint64_t aux_prefix = 0;
};

class TableBuilder {
 public:
  explicit TableBuilder(TableOptions options = {});

  // Keys must be added in strictly increasing order.
  void Add(std::string_view key, std::string_view value, bool add_to_filter = true,
           uint64_t aux_weight = 0);

  uint64_t num_entries() const { return num_entries_; }
  size_t EstimatedSize() const { return payload_.size() + block_.size(); }
  bool empty() const { return num_entries_ == 0; }
  const std::string& smallest() const { return smallest_; }
  const std::string& largest() const { return largest_; }
  uint64_t aux_total() const { return aux_total_; }

  std::string Finish(FileKind kind);

 private:
  void FlushBlock();

  TableOptions options_;
  std::string payload_;
  std::string block_;
  std::string block_first_key_;
  std::vector<IndexEntry> index_;
  BloomFilterBuilder filter_;
  std::string smallest_;
  std::string largest_;
  uint64_t num_entries_ = 0;
  uint64_t aux_total_ = 0;
  uint64_t aux_before_block_ = 0;
};

class Table;

// Forward iterator over one table. Reads one block at a time.
class TableIterator final : public Iterator {
 public:
  explicit TableIterator(std::shared_ptr<const Table> table);

  void SeekToFirst() override;
  void Seek(std::string_view target) override;
  bool Valid() const override { return valid_; }
  void Next() override;
  std::string_view key() const override { return key_; }
  std::string_view value() const override { return value_; }
  Status status() const override { return status_; }

 private:
  bool LoadBlock(size_t index);
  bool ParseNext();

  std::shared_ptr<const Table> table_;
  size_t block_index_ = 0;
  std::string block_;
  std::string_view rest_;
  std::string_view key_;
  std::string_view value_;
  bool valid_ = false;
  Status status_;
};

class Table : public std::enable_shared_from_this<Table> {
 public:
  // Loads footer, index, and filter into memory.
  static Status Open(StorageTier* tier, FileKind kind, uint64_t number,
                     std::shared_ptr<Table>* out);

  // Point lookup. Consults the filter first; reads at most one data block.
  Status Get(std::string_view key, std::string* value, bool* found) const;

  bool MayContain(std::string_view key) const { return filter_.MayContain(key); }
  std::unique_ptr<TableIterator> NewIterator() const;

  const std::vector<IndexEntry>& index() const { return index_; }
  const std::string& smallest() const { return smallest_; }
  const std::string& largest() const { return largest_; }
  uint64_t num_entries() const { return num_entries_; }
  uint64_t aux_total() const { return aux_total_; }
  uint64_t number() const { return number_; }
  uint64_t payload_size() const { return payload_size_; }
  uint32_t fixed_value_size() const { return fixed_value_size_; }
  const BloomFilter& filter() const { return filter_; }
  StorageTier* tier() const { return tier_; }
  FileKind kind() const { return kind_; }

  Status ReadBlock(size_t index, std::string* out) const;

  // Parses one entry from *in; returns false at end of input or corruption.
  static bool ParseEntry(std::string_view* in, uint32_t fixed_value_size, std::string_view* key,
                         std::string_view* value);

 private:
  Table() = default;

  StorageTier* tier_ = nullptr;
  FileKind kind_ = FileKind::kData;
  uint64_t number_ = 0;
  uint64_t payload_size_ = 0;
  uint64_t num_entries_ = 0;
  uint64_t aux_total_ = 0;
  uint32_t fixed_value_size_ = 0;
  std::vector<IndexEntry> index_;
  std::string smallest_;
  std::string largest_;
  BloomFilter filter_;
};

}  // namespace tierkv
