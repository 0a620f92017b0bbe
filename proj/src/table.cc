#include "tierkv/table.h"

#include <algorithm>

#include "tierkv/coding.h"

namespace tierkv {

TableBuilder::TableBuilder(TableOptions options)
    : options_(options), filter_(options.bloom_bits_per_key) {}

void TableBuilder::Add(std::string_view key, std::string_view value, bool add_to_filter,
                       uint64_t aux_weight) {
  if (num_entries_ == 0) smallest_.assign(key);
  largest_.assign(key);
  if (block_.empty()) block_first_key_.assign(key);
  PutFixed32(&block_, static_cast<uint32_t>(key.size()));
  block_.append(key);
  if (options_.fixed_value_size == 0) {
    PutLengthPrefixed(&block_, value);
  } else {
    block_.append(value.data(), options_.fixed_value_size);
  }
  if (add_to_filter) filter_.AddKey(key);
  aux_total_ += aux_weight;
  ++num_entries_;
  if (block_.size() >= options_.block_size) FlushBlock();
}

void TableBuilder::FlushBlock() {
  if (block_.empty()) return;
  IndexEntry e;
  e.first_key = block_first_key_;
  e.offset = payload_.size();
  e.size = static_cast<uint32_t>(block_.size());
  e.aux_prefix = aux_before_block_;
  index_.push_back(std::move(e));
  payload_.append(block_);
  block_.clear();
  aux_before_block_ = aux_total_;
}

std::string TableBuilder::Finish(FileKind kind) {
  FlushBlock();
  const uint64_t filter_offset = payload_.size();
  payload_.append(filter_.Finish());
  const uint64_t filter_size = payload_.size() - filter_offset;

  const uint64_t index_offset = payload_.size();
  PutFixed32(&payload_, static_cast<uint32_t>(index_.size()));
  for (const auto& e : index_) {
    PutLengthPrefixed(&payload_, e.first_key);
    PutFixed64(&payload_, e.offset);
    PutFixed32(&payload_, e.size);
    PutFixed64(&payload_, e.aux_prefix);
  }
  PutLengthPrefixed(&payload_, largest_);
  const uint64_t index_size = payload_.size() - index_offset;

  PutFixed64(&payload_, index_offset);
  PutFixed64(&payload_, index_size);
  PutFixed64(&payload_, filter_offset);
  PutFixed64(&payload_, filter_size);
  PutFixed64(&payload_, num_entries_);
  PutFixed32(&payload_, options_.fixed_value_size);
  PutFixed32(&payload_, static_cast<uint32_t>(kind));
  PutFixed64(&payload_, aux_total_);
  PutFixed64(&payload_, kTableMagic);
  return std::move(payload_);
}

Status Table::Open(StorageTier* tier, FileKind kind, uint64_t number,
                   std::shared_ptr<Table>* out) {
  const uint64_t disk_size = tier->FileSize(kind, number);
  if (disk_size == 0) return Status::NotFound(tier->PathFor(kind, number).string());
  const uint64_t payload_size = disk_size - StorageTier::kSealFooterSize;
  if (payload_size < kTableFooterSize) return Status::Corruption("table too small");

  std::string footer;
  Status s = tier->ReadRange(kind, number, payload_size - kTableFooterSize, kTableFooterSize,
                             &footer);
  if (!s.ok()) return s;
  const char* f = footer.data();
  const uint64_t index_offset = DecodeFixed64(f);
  const uint64_t index_size = DecodeFixed64(f + 8);
  const uint64_t filter_offset = DecodeFixed64(f + 16);
  const uint64_t filter_size = DecodeFixed64(f + 24);
  if (DecodeFixed64(f + 56) != kTableMagic) return Status::Corruption("bad table magic");
  if (filter_offset + filter_size != index_offset ||
      index_offset + index_size + kTableFooterSize != payload_size) {
    return Status::Corruption("bad table footer");
  }

  std::shared_ptr<Table> t(new Table());
  t->tier_ = tier;
  t->kind_ = kind;
  t->number_ = number;
  t->payload_size_ = payload_size;
  t->num_entries_ = DecodeFixed64(f + 32);
  t->fixed_value_size_ = DecodeFixed32(f + 40);
  t->aux_total_ = DecodeFixed64(f + 48);

  std::string meta;
  s = tier->ReadRange(kind, number, filter_offset, filter_size + index_size, &meta);
  if (!s.ok()) return s;
  t->filter_ = BloomFilter(meta.substr(0, filter_size));
  std::string_view in(meta);
  in.remove_prefix(filter_size);
  uint32_t count;
  if (!GetFixed32(&in, &count)) return Status::Corruption("bad index block");
  t->index_.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    std::string_view first;
    IndexEntry e;
    uint64_t off, aux;
    uint32_t size;
    if (!GetLengthPrefixed(&in, &first) || !GetFixed64(&in, &off) || !GetFixed32(&in, &size) ||
        !GetFixed64(&in, &aux)) {
      return Status::Corruption("bad index entry");
    }
    e.first_key.assign(first);
    e.offset = off;
    e.size = size;
    e.aux_prefix = aux;
    t->index_.push_back(std::move(e));
  }
  std::string_view last;
  if (!GetLengthPrefixed(&in, &last)) return Status::Corruption("bad index trailer");
  t->largest_.assign(last);
  if (!t->index_.empty()) t->smallest_ = t->index_.front().first_key;
  *out = std::move(t);
  return Status::OK();
}

Status Table::ReadBlock(size_t index, std::string* out) const {
  const IndexEntry& e = index_[index];
  return tier_->ReadRange(kind_, number_, e.offset, e.size, out);
}

bool Table::ParseEntry(std::string_view* in, uint32_t fixed_value_size, std::string_view* key,
                       std::string_view* value) {
  if (!GetLengthPrefixed(in, key)) return false;
  if (fixed_value_size == 0) return GetLengthPrefixed(in, value);
  if (in->size() < fixed_value_size) return false;
  *value = in->substr(0, fixed_value_size);
  in->remove_prefix(fixed_value_size);
  return true;
}

Status Table::Get(std::string_view key, std::string* value, bool* found) const {
  *found = false;
  if (index_.empty() || key < smallest_ || key > largest_) return Status::OK();
  if (!filter_.MayContain(key)) return Status::OK();
  // Last block whose first key <= key.
  auto it = std::upper_bound(index_.begin(), index_.end(), key,
                             [](std::string_view k, const IndexEntry& e) { return k < e.first_key; });
  if (it == index_.begin()) return Status::OK();
  size_t block = static_cast<size_t>(std::prev(it) - index_.begin());
  std::string buf;
  Status s = ReadBlock(block, &buf);
  if (!s.ok()) return s;
  std::string_view in(buf), k, v;
  while (ParseEntry(&in, fixed_value_size_, &k, &v)) {
    if (k == key) {
      value->assign(v);
      *found = true;
      return Status::OK();
    }
    if (k > key) break;
  }
  return Status::OK();
}

std::unique_ptr<TableIterator> Table::NewIterator() const {
  return std::make_unique<TableIterator>(shared_from_this());
}

TableIterator::TableIterator(std::shared_ptr<const Table> table) : table_(std::move(table)) {}

bool TableIterator::LoadBlock(size_t index) {
  block_index_ = index;
  if (index >= table_->index().size()) {
    valid_ = false;
    return false;
  }
  status_ = table_->ReadBlock(index, &block_);
  if (!status_.ok()) {
    valid_ = false;
    return false;
  }
  rest_ = block_;
  return true;
}

bool TableIterator::ParseNext() {
  while (true) {
    if (!rest_.empty()) {
      if (!Table::ParseEntry(&rest_, table_->fixed_value_size(), &key_, &value_)) {
        status_ = Status::Corruption("bad block entry");
        valid_ = false;
        return false;
      }
      valid_ = true;
      return true;
    }
    if (!LoadBlock(block_index_ + 1)) return false;
  }
}

void TableIterator::SeekToFirst() {
  if (!LoadBlock(0)) return;
  ParseNext();
}

void TableIterator::Seek(std::string_view target) {
  const auto& index = table_->index();
  auto it = std::upper_bound(index.begin(), index.end(), target,
                             [](std::string_view k, const IndexEntry& e) { return k < e.first_key; });
  size_t block = it == index.begin() ? 0 : static_cast<size_t>(std::prev(it) - index.begin());
  if (!LoadBlock(block)) return;
  while (ParseNext() && key_ < target) {
  }
}

void TableIterator::Next() {
  if (!valid_) return;
  ParseNext();
}

}  // namespace tierkv
