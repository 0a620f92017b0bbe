#include "tierkv/promotion_cache.h"

#include <algorithm>

namespace tierkv {

bool PromotionCache::Get(std::string_view key, std::string* value, uint64_t* seqno) const {
  std::shared_lock lock(mu_);
  auto it = mutable_.find(key);
  if (it != mutable_.end()) {
    *value = it->second.value;
    *seqno = it->second.seqno;
    return true;
  }
  for (const auto& ipc : immutables_) {
    auto e = ipc->entries.find(key);
    if (e == ipc->entries.end() || ipc->updated.count(key) != 0) continue;
    *value = e->second.value;
    *seqno = e->second.seqno;
    return true;
  }
  return false;
}

InsertResult PromotionCache::TryInsert(std::string_view key, std::string_view value,
                                       uint64_t seqno, const std::vector<FileMetaPtr>& sources,
                                       uint64_t read_epoch) {
  std::unique_lock lock(mu_);
  bool abort = false;
  for (const auto& f : sources) {
    if (f->compaction_mark.load(std::memory_order_acquire)) {
      abort = true;
      break;
    }
  }
  if (!abort && read_epoch < sd_epoch_.load(std::memory_order_relaxed)) {
    // The log only remembers the newest compactions; a reader older than
    // all of them cannot be cleared.
    if (sd_log_.empty() || sd_log_.front().epoch > read_epoch + 1) {
      abort = true;
    } else {
      for (auto it = sd_log_.rbegin(); it != sd_log_.rend() && it->epoch > read_epoch; ++it) {
        if (key >= it->lo && key <= it->hi) {
          abort = true;
          break;
        }
      }
    }
  }
  if (abort) {
    aborts_.fetch_add(1, std::memory_order_relaxed);
    return InsertResult::kAborted;
  }
  if (mutable_bytes_.load(std::memory_order_relaxed) >= 2 * seal_bytes_) return InsertResult::kFull;
  auto it = mutable_.find(key);
  if (it != mutable_.end()) {
    if (it->second.seqno >= seqno) return InsertResult::kInserted;
    mutable_bytes_.fetch_sub(it->first.size() + it->second.value.size());
    mutable_.erase(it);
  }
  mutable_bytes_.fetch_add(key.size() + value.size());
  mutable_.emplace(std::string(key), PromotionEntry{std::string(value), seqno});
  inserts_.fetch_add(1, std::memory_order_relaxed);
  return InsertResult::kInserted;
}

void PromotionCache::MarkCompaction(const std::vector<FileMetaPtr>& inputs, bool into_sd,
                                    std::string_view lo, std::string_view hi) {
  std::unique_lock lock(mu_);
  for (const auto& f : inputs) f->compaction_mark.store(true, std::memory_order_release);
  if (!into_sd) return;
  const uint64_t epoch = sd_epoch_.load(std::memory_order_relaxed) + 1;
  sd_log_.push_back(LoggedCompaction{epoch, std::string(lo), std::string(hi)});
  if (sd_log_.size() > kEpochLogCapacity) sd_log_.pop_front();
  sd_epoch_.store(epoch, std::memory_order_release);
}

std::vector<std::pair<std::string, PromotionEntry>> PromotionCache::Extract(std::string_view lo,
                                                                            std::string_view hi) {
  std::unique_lock lock(mu_);
  std::map<std::string, PromotionEntry, std::less<>> out;
  for (auto it = mutable_.lower_bound(lo); it != mutable_.end() && it->first <= hi;) {
    mutable_bytes_.fetch_sub(it->first.size() + it->second.value.size());
    out.emplace(it->first, std::move(it->second));
    it = mutable_.erase(it);
  }
  for (const auto& ipc : immutables_) {
    for (auto it = ipc->entries.lower_bound(lo); it != ipc->entries.end() && it->first <= hi; ++it) {
      if (ipc->updated.count(it->first) != 0) continue;
      ipc->updated.insert(it->first);
      auto cur = out.find(it->first);
      if (cur == out.end() || cur->second.seqno < it->second.seqno) out[it->first] = it->second;
    }
  }
  return {std::make_move_iterator(out.begin()), std::make_move_iterator(out.end())};
}

std::shared_ptr<ImmutablePromotionCache> PromotionCache::Seal(
    std::shared_ptr<const SuperVersion> snapshot) {
  std::unique_lock lock(mu_);
  if (mutable_.empty()) return nullptr;
  auto ipc = std::make_shared<ImmutablePromotionCache>();
  ipc->id = next_id_++;
  ipc->entries.swap(mutable_);
  ipc->bytes = mutable_bytes_.exchange(0);
  ipc->snapshot = std::move(snapshot);
  immutables_.insert(immutables_.begin(), ipc);
  return ipc;
}

void PromotionCache::RecordUpdatedKeys(const std::vector<std::string>& keys) {
  std::unique_lock lock(mu_);
  if (immutables_.empty()) return;
  for (const auto& k : keys) {
    for (const auto& ipc : immutables_) {
      if (ipc->entries.count(k) != 0) ipc->updated.insert(k);
    }
  }
}

void PromotionCache::FilterUpdated(const ImmutablePromotionCache& ipc,
                                   std::vector<std::pair<std::string, PromotionEntry>>* entries) const {
  std::shared_lock lock(mu_);
  entries->erase(std::remove_if(entries->begin(), entries->end(),
                                [&](const auto& e) { return ipc.updated.count(e.first) != 0; }),
                 entries->end());
}

void PromotionCache::RemoveImmutable(uint64_t id) {
  std::unique_lock lock(mu_);
  immutables_.erase(std::remove_if(immutables_.begin(), immutables_.end(),
                                   [id](const auto& p) { return p->id == id; }),
                    immutables_.end());
}

size_t PromotionCache::num_immutable() const {
  std::shared_lock lock(mu_);
  return immutables_.size();
}

}  // namespace tierkv
