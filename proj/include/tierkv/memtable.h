#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tierkv/record.h"

namespace tierkv {

// In-memory write buffer holding the newest version of each key.
class MemTable {
 public:
  struct Entry {
    uint64_t seqno = 0;
    ValueKind kind = ValueKind::kPut;
    std::string value;
  };

  explicit MemTable(uint64_t id, bool promotion = false) : id_(id), promotion_(promotion) {}

  void Add(std::string_view key, uint64_t seqno, ValueKind kind, std::string_view value) {
    std::unique_lock lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      bytes_ += key.size() + value.size() + kEntryOverhead;
      entries_.emplace(std::string(key), Entry{seqno, kind, std::string(value)});
      return;
    }
    if (seqno < it->second.seqno) return;
    bytes_ += value.size();
    bytes_ -= it->second.value.size();
    it->second = Entry{seqno, kind, std::string(value)};
  }

  bool Get(std::string_view key, Entry* out) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    *out = it->second;
    return true;
  }

  // Newest seqno stored for key, or 0.
  uint64_t SeqnoOf(std::string_view key) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.seqno;
  }

  std::vector<std::string> Keys() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, e] : entries_) out.push_back(k);
    return out;
  }

  // Only valid once the table no longer receives writes.
  const std::map<std::string, Entry, std::less<>>& sealed_entries() const { return entries_; }

  size_t ApproximateBytes() const { return bytes_.load(std::memory_order_relaxed); }
  size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }
  bool empty() const { return size() == 0; }
  uint64_t id() const { return id_; }
  bool promotion() const { return promotion_; }

 private:
  static constexpr size_t kEntryOverhead = 16;

  const uint64_t id_;
  const bool promotion_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Entry, std::less<>> entries_;
  std::atomic<size_t> bytes_{0};
};

}  // namespace tierkv
