#include "tierkv/ralt.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "tierkv/threshold.h"

namespace tierkv {

namespace {

constexpr uint64_t kTiebreakSeed = 0x5eed;

// Hides keys at or below an exclusive lower bound.
class BoundedIterator final : public Iterator {
 public:
  BoundedIterator(std::unique_ptr<Iterator> inner, std::optional<std::string> after)
      : inner_(std::move(inner)), after_(std::move(after)) {}

  bool Valid() const override { return inner_->Valid(); }
  void SeekToFirst() override {
    if (after_) {
      Seek(*after_);
    } else {
      inner_->SeekToFirst();
    }
  }
  void Seek(std::string_view target) override {
    if (after_ && target <= *after_) {
      inner_->Seek(*after_);
      if (inner_->Valid() && inner_->key() == *after_) inner_->Next();
    } else {
      inner_->Seek(target);
    }
  }
  void Next() override { inner_->Next(); }
  std::string_view key() const override { return inner_->key(); }
  std::string_view value() const override { return inner_->value(); }
  Status status() const override { return inner_->status(); }

 private:
  std::unique_ptr<Iterator> inner_;
  std::optional<std::string> after_;
};

uint64_t PrefixAt(const Table& t, size_t i) {
  return i < t.index().size() ? t.index()[i].aux_prefix : t.aux_total();
}

// Index of the first block whose first key is > key.
size_t BlockAfter(const Table& t, std::string_view key) {
  const auto& idx = t.index();
  auto it = std::upper_bound(idx.begin(), idx.end(), key,
                             [](std::string_view k, const IndexEntry& e) { return k < e.first_key; });
  return static_cast<size_t>(it - idx.begin());
}

// Index of the first block whose first key is >= key.
size_t BlockAtOrAfter(const Table& t, std::string_view key) {
  const auto& idx = t.index();
  auto it = std::lower_bound(idx.begin(), idx.end(), key,
                             [](const IndexEntry& e, std::string_view k) { return e.first_key < k; });
  return static_cast<size_t>(it - idx.begin());
}

std::vector<RaltTableRef> AllRefs(const RaltVersion& v) {
  std::vector<RaltTableRef> out;
  for (const auto& level : v.levels) out.insert(out.end(), level.begin(), level.end());
  return out;
}

std::vector<RaltTableRef> OverlappingRefs(const RaltVersion& v, std::string_view lo,
                                          std::string_view hi) {
  std::vector<RaltTableRef> out;
  for (const auto& level : v.levels) {
    for (const auto& r : level) {
      if (r.largest() < lo || r.smallest() > hi) continue;
      if (r.after && *r.after >= r.largest()) continue;
      out.push_back(r);
    }
  }
  return out;
}

void UpdateMax(std::atomic<uint64_t>* target, uint64_t value) {
  uint64_t cur = target->load(std::memory_order_relaxed);
  while (value > cur && !target->compare_exchange_weak(cur, value, std::memory_order_relaxed)) {
  }
}

}  // namespace

Status RaltConfig::Validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) return Status::InvalidArgument("alpha must be in (0,1)");
  if (!(evict_fraction > 0.0 && evict_fraction < 1.0)) {
    return Status::InvalidArgument("evict_fraction must be in (0,1)");
  }
  if (hot_set_size_limit == 0 || physical_size_limit == 0) {
    return Status::InvalidArgument("RALT limits must be positive");
  }
  if (tick_advance_bytes == 0) return Status::InvalidArgument("tick_advance_bytes must be positive");
  if (unsorted_buffer_capacity == 0) return Status::InvalidArgument("buffer capacity is zero");
  if (num_levels < 2) return Status::InvalidArgument("RALT needs at least 2 levels");
  if (level_size_ratio <= 1.0) return Status::InvalidArgument("level_size_ratio must exceed 1");
  if (sample_count == 0) return Status::InvalidArgument("sample_count must be positive");
  if (l0_compaction_trigger < 1) return Status::InvalidArgument("l0_compaction_trigger < 1");
  if (autotune.enabled && !autotune.Valid()) return Status::InvalidArgument("bad autotune params");
  return Status::OK();
}

RaltFile::~RaltFile() {
  if (tier != nullptr && table != nullptr) {
    const uint64_t number = table->number();
    table.reset();
    tier->DeleteFile(FileKind::kRalt, number);
    if (live_bytes != nullptr) live_bytes->fetch_sub(file_size, std::memory_order_relaxed);
  }
}

double RaltTableRef::VisibleFraction() const {
  if (!after) return 1.0;
  const Table& t = *file->table;
  if (*after >= t.largest()) return 0.0;
  const size_t n = t.index().size();
  if (n == 0) return 0.0;
  const size_t b = BlockAfter(t, *after);
  if (b == 0) return 1.0;
  // Block b-1 holds the bound; count half of it.
  return std::clamp((static_cast<double>(n - b) + 0.5) / static_cast<double>(n), 0.0, 1.0);
}

uint64_t RaltTableRef::HotSize() const {
  if (!after) return file->hot_size;
  const Table& t = *file->table;
  if (*after >= t.largest()) return 0;
  const size_t b = BlockAfter(t, *after);
  if (b == 0) return file->hot_size;
  const uint64_t partial = PrefixAt(t, b) - PrefixAt(t, b - 1);
  return t.aux_total() - PrefixAt(t, b) + partial / 2;
}

uint64_t RaltTableRef::AllHotSize() const {
  return static_cast<uint64_t>(std::llround(VisibleFraction() * static_cast<double>(file->all_hot_size)));
}

uint64_t RaltTableRef::PhysicalSize() const {
  return static_cast<uint64_t>(std::llround(VisibleFraction() * static_cast<double>(file->physical_size)));
}

uint64_t RaltVersion::HotSize() const {
  uint64_t s = 0;
  for (size_t i = 0; i < levels.size(); ++i) s += LevelHotSize(static_cast<int>(i));
  return s;
}

uint64_t RaltVersion::PhysicalSize() const {
  uint64_t s = 0;
  for (size_t i = 0; i < levels.size(); ++i) s += LevelPhysicalSize(static_cast<int>(i));
  return s;
}

uint64_t RaltVersion::LevelPhysicalSize(int level) const {
  uint64_t s = 0;
  for (const auto& r : levels[static_cast<size_t>(level)]) s += r.PhysicalSize();
  return s;
}

uint64_t RaltVersion::LevelHotSize(int level) const {
  uint64_t s = 0;
  for (const auto& r : levels[static_cast<size_t>(level)]) s += r.HotSize();
  return s;
}

size_t RaltVersion::NumTables() const {
  size_t n = 0;
  for (const auto& l : levels) n += l.size();
  return n;
}

RaltMergedIterator::RaltMergedIterator(std::vector<RaltTableRef> refs, MergeParams params,
                                       std::optional<std::string> lo,
                                       std::optional<std::string> hi)
    : refs_(std::move(refs)), params_(std::move(params)), hi_(std::move(hi)) {
  std::vector<std::unique_ptr<Iterator>> children;
  children.reserve(refs_.size());
  for (const auto& r : refs_) {
    children.push_back(std::make_unique<BoundedIterator>(r.file->table->NewIterator(), r.after));
  }
  iter_ = std::make_unique<MergingIterator>(std::move(children));
  if (lo) {
    iter_->Seek(*lo);
  } else {
    iter_->SeekToFirst();
  }
  Advance();
}

void RaltMergedIterator::Advance() {
  valid_ = false;
  if (!iter_->Valid()) {
    status_ = iter_->status();
    return;
  }
  if (hi_ && iter_->key() > *hi_) return;
  RaltRecord acc = RaltRecord::DecodePayload(iter_->key(), iter_->value());
  iter_->Next();
  while (iter_->Valid() && iter_->key() == acc.key) {
    acc = MergeRecords(acc, RaltRecord::DecodePayload(iter_->key(), iter_->value()), params_);
    iter_->Next();
  }
  status_ = iter_->status();
  if (!status_.ok()) return;
  record_ = std::move(acc);
  valid_ = true;
}

RaltHotIterator::RaltHotIterator(std::shared_ptr<const RaltVersion> version, MergeParams params,
                                 std::string lo, std::string hi)
    : version_(std::move(version)),
      params_(params),
      inner_(OverlappingRefs(*version_, lo, hi), params, lo, hi) {
  SkipCold();
}

void RaltHotIterator::Next() {
  inner_.Next();
  SkipCold();
}

void RaltHotIterator::SkipCold() {
  const ScoreThresholds& thr = version_->thresholds;
  while (inner_.Valid() && RankOf(inner_.record(), thr.ref_tick, params_) < thr.hot) inner_.Next();
}

// Cuts a key-ordered record stream into RALT tables of the target size.
class Ralt::TableSink {
 public:
  TableSink(Ralt* ralt, const ScoreThresholds& thr, std::vector<RaltTableRef>* out)
      : ralt_(ralt), thr_(thr), out_(out) {}

  Status Add(const RaltRecord& r) {
    if (!builder_) {
      TableOptions opts;
      opts.block_size = ralt_->config_.block_size;
      opts.bloom_bits_per_key = ralt_->config_.bloom_bits_per_key;
      opts.fixed_value_size = RaltRecord::kFixedPayloadSize;
      builder_ = std::make_unique<TableBuilder>(opts);
      hot_ = all_hot_ = phys_ = 0;
    }
    const bool hot = ralt_->IsHotRecord(r, thr_);
    builder_->Add(r.key, r.EncodePayload(), hot, hot ? r.HotSize() : 0);
    all_hot_ += r.HotSize();
    phys_ += r.PhysicalSize();
    if (hot) hot_ += r.HotSize();
    written_hot_ += hot ? r.HotSize() : 0;
    written_phys_ += r.PhysicalSize();
    if (builder_->EstimatedSize() >= ralt_->config_.table_target_size) return Cut();
    return Status::OK();
  }

  Status Finish() {
    if (builder_ && !builder_->empty()) return Cut();
    return Status::OK();
  }

  uint64_t written_hot() const { return written_hot_; }
  uint64_t written_phys() const { return written_phys_; }

 private:
  Status Cut() {
    StorageTier* tier = ralt_->fd_;
    const uint64_t number = ralt_->next_file_number_.fetch_add(1);
    const std::string payload = builder_->Finish(FileKind::kRalt);
    builder_.reset();
    Status s = tier->WriteFile(FileKind::kRalt, number, payload);
    if (!s.ok()) return s;
    auto f = std::make_shared<RaltFile>();
    s = Table::Open(tier, FileKind::kRalt, number, &f->table);
    if (!s.ok()) {
      tier->DeleteFile(FileKind::kRalt, number);
      return s;
    }
    f->tier = tier;
    f->live_bytes = &ralt_->live_file_bytes_;
    f->file_size = tier->FileSize(FileKind::kRalt, number);
    f->hot_size = hot_;
    f->all_hot_size = all_hot_;
    f->physical_size = phys_;
    const uint64_t live = ralt_->live_file_bytes_.fetch_add(f->file_size) + f->file_size;
    UpdateMax(&ralt_->peak_file_bytes_, live);
    out_->push_back(RaltTableRef{std::move(f), std::nullopt});
    return Status::OK();
  }

  Ralt* ralt_;
  ScoreThresholds thr_;
  std::vector<RaltTableRef>* out_;
  std::unique_ptr<TableBuilder> builder_;
  uint64_t hot_ = 0;
  uint64_t all_hot_ = 0;
  uint64_t phys_ = 0;
  uint64_t written_hot_ = 0;
  uint64_t written_phys_ = 0;
};

Ralt::Ralt(StorageTier* fd, RaltConfig config)
    : fd_(fd),
      config_(std::move(config)),
      hot_limit_(config_.hot_set_size_limit),
      physical_limit_(config_.physical_size_limit) {
  merge_params_.method = config_.scoring_method;
  merge_params_.alpha = config_.alpha;
  merge_params_.autotune = config_.autotune;
  auto v = std::make_shared<RaltVersion>();
  v->levels.resize(static_cast<size_t>(config_.num_levels));
  version_ = std::move(v);
  hot_fraction_.assign(static_cast<size_t>(config_.num_levels), 1.0);
  phys_fraction_.assign(static_cast<size_t>(config_.num_levels), 1.0);
  if (config_.background) worker_ = std::thread([this] { BackgroundLoop(); });
}

Ralt::~Ralt() {
  {
    std::lock_guard<std::mutex> l(queue_mu_);
    stop_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  std::lock_guard<std::mutex> l(version_mu_);
  version_.reset();
}

std::shared_ptr<const RaltVersion> Ralt::current() const {
  std::lock_guard<std::mutex> l(version_mu_);
  return version_;
}

void Ralt::Install(std::shared_ptr<const RaltVersion> v) {
  std::lock_guard<std::mutex> l(version_mu_);
  version_ = std::move(v);
}

bool Ralt::IsHotRecord(const RaltRecord& r, const ScoreThresholds& thr) const {
  return RankOf(r, thr.ref_tick, merge_params_) >= thr.hot;
}

void Ralt::LogAccess(std::string_view key, uint64_t value_len) {
  RaltRecord r;
  r.key.assign(key);
  r.value_len = value_len;
  std::vector<RaltRecord> full;
  {
    std::lock_guard<std::mutex> l(buffer_mu_);
    r.tick = tick_.load(std::memory_order_relaxed);
    r.score = config_.scoring_method == ScoringMethod::kLRU ? static_cast<double>(++access_clock_)
                                                             : 1.0;
    const auto c = autotune::OnInsert(config_.autotune, epoch_.load(std::memory_order_relaxed));
    r.counter = c.counter;
    r.tag = c.tag;
    r.epoch = c.epoch;
    const uint64_t hot = r.HotSize();
    accessed_bytes_ += hot;
    while (accessed_bytes_ >= config_.tick_advance_bytes) {
      accessed_bytes_ -= config_.tick_advance_bytes;
      tick_.fetch_add(1, std::memory_order_relaxed);
    }
    if (config_.autotune.enabled) {
      const uint64_t period = config_.autotune.EffectiveDecayPeriod();
      accessed_since_decay_ += hot;
      while (accessed_since_decay_ >= period) {
        accessed_since_decay_ -= period;
        epoch_.fetch_add(1, std::memory_order_relaxed);
      }
    }
    buffer_bytes_ += r.PhysicalSize();
    buffer_.push_back(std::move(r));
    if (buffer_bytes_ >= config_.unsorted_buffer_capacity) {
      full.swap(buffer_);
      buffer_bytes_ = 0;
    }
  }
  logged_accesses_.fetch_add(1, std::memory_order_relaxed);
  if (!full.empty()) ProcessBuffer(std::move(full));
}

void Ralt::ProcessBuffer(std::vector<RaltRecord> records) {
  if (config_.background) {
    std::unique_lock<std::mutex> l(queue_mu_);
    // Bounded backlog: callers wait rather than queue unbounded memory.
    queue_cv_.wait(l, [this] { return stop_ || pending_.size() < 4; });
    if (stop_) return;
    pending_.push_back(std::move(records));
    l.unlock();
    queue_cv_.notify_all();
    return;
  }
  std::lock_guard<std::mutex> l(struct_mu_);
  FlushRecords(std::move(records));
  MaybeCompact();
  MaybeEvict();
}

void Ralt::BackgroundLoop() {
  for (;;) {
    std::vector<RaltRecord> records;
    {
      std::unique_lock<std::mutex> l(queue_mu_);
      queue_cv_.wait(l, [this] { return stop_ || !pending_.empty(); });
      if (stop_) return;
      records = std::move(pending_.front());
      pending_.pop_front();
      working_ = true;
    }
    queue_cv_.notify_all();
    {
      std::lock_guard<std::mutex> l(struct_mu_);
      FlushRecords(std::move(records));
      MaybeCompact();
      MaybeEvict();
    }
    {
      std::lock_guard<std::mutex> l(queue_mu_);
      working_ = false;
    }
    idle_cv_.notify_all();
  }
}

void Ralt::Flush() {
  std::vector<RaltRecord> records;
  {
    std::lock_guard<std::mutex> l(buffer_mu_);
    records.swap(buffer_);
    buffer_bytes_ = 0;
  }
  if (config_.background) {
    std::unique_lock<std::mutex> l(queue_mu_);
    if (!records.empty()) pending_.push_back(std::move(records));
    queue_cv_.notify_all();
    idle_cv_.wait(l, [this] { return stop_ || (pending_.empty() && !working_); });
    return;
  }
  if (records.empty()) return;
  std::lock_guard<std::mutex> l(struct_mu_);
  FlushRecords(std::move(records));
  MaybeCompact();
  MaybeEvict();
}

Status Ralt::WriteRun(const std::vector<RaltRecord>& records, const ScoreThresholds& thr,
                      std::vector<RaltTableRef>* out) {
  TableSink sink(this, thr, out);
  for (const auto& r : records) {
    Status s = sink.Add(r);
    if (!s.ok()) return s;
  }
  return sink.Finish();
}

Status Ralt::FlushRecords(std::vector<RaltRecord> records) {
  if (records.empty()) return Status::OK();
  std::stable_sort(records.begin(), records.end(),
                   [](const RaltRecord& a, const RaltRecord& b) { return a.key < b.key; });
  std::vector<RaltRecord> merged;
  merged.reserve(records.size());
  for (auto& r : records) {
    if (!merged.empty() && merged.back().key == r.key) {
      merged.back() = MergeRecords(merged.back(), r, merge_params_);
    } else {
      merged.push_back(std::move(r));
    }
  }
  auto v = current();
  std::vector<RaltTableRef> out;
  Status s = WriteRun(merged, v->thresholds, &out);
  if (!s.ok()) return s;
  auto nv = std::make_shared<RaltVersion>(*v);
  auto& l0 = nv->levels[0];
  l0.insert(l0.end(), out.begin(), out.end());
  nv->l0_runs++;
  Install(std::move(nv));
  flushes_.fetch_add(1, std::memory_order_relaxed);
  return Status::OK();
}

Status Ralt::IngestSortedRun(int level, const std::vector<RaltRecord>& records) {
  if (level < 0 || level >= config_.num_levels) return Status::InvalidArgument("bad RALT level");
  for (size_t i = 1; i < records.size(); ++i) {
    if (!(records[i - 1].key < records[i].key)) {
      return Status::InvalidArgument("records must be sorted and unique");
    }
  }
  std::lock_guard<std::mutex> l(struct_mu_);
  auto v = current();
  if (level > 0 && !v->levels[static_cast<size_t>(level)].empty()) {
    return Status::InvalidArgument("target RALT level is not empty");
  }
  std::vector<RaltTableRef> out;
  Status s = WriteRun(records, v->thresholds, &out);
  if (!s.ok()) return s;
  auto nv = std::make_shared<RaltVersion>(*v);
  auto& dst = nv->levels[static_cast<size_t>(level)];
  dst.insert(dst.end(), out.begin(), out.end());
  if (level == 0 && !out.empty()) nv->l0_runs++;
  Install(std::move(nv));
  return Status::OK();
}

uint64_t Ralt::LevelTarget(int level) const {
  return static_cast<uint64_t>(static_cast<double>(config_.unsorted_buffer_capacity) *
                               std::pow(config_.level_size_ratio, level));
}

Status Ralt::MergeLevels(const std::vector<int>& sources, int target, const ScoreThresholds& thr,
                         const Transform& transform) {
  std::vector<int> levels = sources;
  levels.push_back(target);
  std::optional<std::string> upto;  // keys <= upto are already merged
  uint64_t in_upper_hot = 0;
  uint64_t in_upper_phys = 0;
  uint64_t in_lower_hot = 0;
  uint64_t in_lower_phys = 0;
  uint64_t out_hot = 0;
  uint64_t out_phys = 0;
  {
    auto v = current();
    for (int lv : sources) {
      in_upper_hot += v->LevelHotSize(lv);
      in_upper_phys += v->LevelPhysicalSize(lv);
    }
    in_lower_hot = v->LevelHotSize(target);
    in_lower_phys = v->LevelPhysicalSize(target);
  }
  for (;;) {
    auto v = current();
    std::vector<RaltTableRef> inputs;
    for (int lv : levels) {
      for (const auto& r : v->levels[static_cast<size_t>(lv)]) {
        if (!upto || r.largest() > *upto) inputs.push_back(r);
      }
    }
    if (inputs.empty()) break;

    // Step end: the largest table boundary that keeps the step within the
    // table budget; at least one input is always fully consumed.
    std::vector<std::string> cands;
    cands.reserve(inputs.size());
    for (const auto& r : inputs) cands.push_back(r.largest());
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    std::string end = cands.front();
    for (const auto& c : cands) {
      size_t n = 0;
      for (const auto& r : inputs) n += r.smallest() <= c ? 1 : 0;
      if (n > config_.max_tables_per_merge_step && c != cands.front()) break;
      end = c;
    }

    std::vector<RaltTableRef> step_inputs;
    for (const auto& r : inputs) {
      if (r.smallest() <= end) step_inputs.push_back(r);
    }
    std::vector<RaltTableRef> outputs;
    TableSink sink(this, thr, &outputs);
    RaltMergedIterator it(step_inputs, merge_params_, std::nullopt, end);
    for (; it.Valid(); it.Next()) {
      RaltRecord r = it.record();
      if (transform && !transform(&r)) continue;
      Status s = sink.Add(r);
      if (!s.ok()) return s;
    }
    if (!it.status().ok()) return it.status();
    Status s = sink.Finish();
    if (!s.ok()) return s;
    out_hot += sink.written_hot();
    out_phys += sink.written_phys();

    auto nv = std::make_shared<RaltVersion>(*v);
    for (int lv : levels) {
      std::vector<RaltTableRef> kept;
      for (const auto& r : v->levels[static_cast<size_t>(lv)]) {
        if (upto && r.largest() <= *upto) {
          kept.push_back(r);  // output of an earlier step
        } else if (r.largest() <= end) {
          continue;  // fully consumed
        } else if (r.smallest() <= end) {
          kept.push_back(RaltTableRef{r.file, end});
        } else {
          kept.push_back(r);
        }
      }
      if (lv == target) {
        kept.insert(kept.end(), outputs.begin(), outputs.end());
        std::sort(kept.begin(), kept.end(), [](const RaltTableRef& a, const RaltTableRef& b) {
          return a.smallest() < b.smallest();
        });
      }
      nv->levels[static_cast<size_t>(lv)] = std::move(kept);
    }
    if (nv->levels[0].empty()) nv->l0_runs = 0;
    nv->thresholds = thr;
    Install(std::move(nv));
    upto = end;
  }
  if (!transform) {
    NoteFraction(sources.back(), in_upper_hot, in_lower_hot, out_hot, in_upper_phys,
                 in_lower_phys, out_phys);
  }
  return Status::OK();
}

void Ralt::NoteFraction(int level, uint64_t in_upper_hot, uint64_t in_lower_hot, uint64_t out_hot,
                        uint64_t in_upper_phys, uint64_t in_lower_phys, uint64_t out_phys) {
  auto frac = [](uint64_t upper, uint64_t lower, uint64_t out) {
    if (upper == 0) return 1.0;
    const double f = (static_cast<double>(out) - static_cast<double>(lower)) /
                     static_cast<double>(upper);
    return std::clamp(f, 0.0, 1.0);
  };
  std::lock_guard<std::mutex> l(version_mu_);
  auto i = static_cast<size_t>(level);
  hot_fraction_[i] = 0.5 * hot_fraction_[i] + 0.5 * frac(in_upper_hot, in_lower_hot, out_hot);
  phys_fraction_[i] = 0.5 * phys_fraction_[i] + 0.5 * frac(in_upper_phys, in_lower_phys, out_phys);
}

Status Ralt::MaybeCompact() {
  for (;;) {
    auto v = current();
    const int last = config_.num_levels - 1;
    if (v->l0_runs >= config_.l0_compaction_trigger) {
      Status s = MergeLevels({0}, 1, v->thresholds, nullptr);
      if (!s.ok()) return s;
      compactions_.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    bool merged = false;
    for (int lv = 1; lv < last; ++lv) {
      if (v->LevelPhysicalSize(lv) > LevelTarget(lv)) {
        Status s = MergeLevels({lv}, lv + 1, v->thresholds, nullptr);
        if (!s.ok()) return s;
        compactions_.fetch_add(1, std::memory_order_relaxed);
        merged = true;
        break;
      }
    }
    if (!merged) return Status::OK();
  }
}

bool Ralt::NeedsEviction() const {
  const RaltStats st = GetStats();
  return st.estimated_hot_size > hot_limit_.load(std::memory_order_relaxed) ||
         st.estimated_physical_size > physical_limit_.load(std::memory_order_relaxed);
}

void Ralt::MaybeEvict() {
  if (!NeedsEviction()) return;
  if (evicting_.exchange(true)) return;
  EvictLocked();
  evicting_.store(false);
}

Status Ralt::Evict() {
  if (evicting_.exchange(true)) return Status::Busy("eviction already running");
  Status s;
  {
    std::lock_guard<std::mutex> l(struct_mu_);
    s = EvictLocked();
  }
  evicting_.store(false);
  return s;
}

Status Ralt::EvictLocked() {
  auto v = current();
  ++eviction_seq_;
  if (config_.scoring_method == ScoringMethod::kClock) return EvictClockLocked(v);

  const uint64_t ref_tick = tick_.load(std::memory_order_relaxed);
  const uint32_t epoch_now = epoch_.load(std::memory_order_relaxed);
  const AutotuneParams& at = config_.autotune;
  const std::vector<RaltTableRef> refs = AllRefs(*v);
  uint64_t ub_hot = 0;
  uint64_t ub_phys = 0;
  for (const auto& r : refs) {
    ub_hot += r.AllHotSize();
    ub_phys += r.PhysicalSize();
  }
  const uint64_t seed = config_.seed ^ Mix64(eviction_seq_);
  ThresholdEstimator hot_est(ub_hot + 1, config_.sample_count, seed);
  ThresholdEstimator phys_est(ub_phys + 1, config_.sample_count, Mix64(seed));

  // One ordered scan: exact totals, both samples, and the stable/unstable
  // split used by auto-tuning.
  uint64_t total_phys = 0;
  uint64_t stable_hot = 0;
  uint64_t stable_phys = 0;
  uint64_t unstable_phys = 0;
  std::map<uint64_t, uint64_t> unstable_by_tick;
  {
    RaltMergedIterator it(refs, merge_params_);
    for (; it.Valid(); it.Next()) {
      const RaltRecord& r = it.record();
      const RankKey rank = RankOf(r, ref_tick, merge_params_);
      hot_est.Add(r.HotSize(), rank);
      phys_est.Add(r.PhysicalSize(), rank);
      total_phys += r.PhysicalSize();
      if (at.enabled) {
        const uint32_t c = autotune::EffectiveCounter(r.counter, r.epoch, epoch_now);
        if (autotune::IsStable(c, r.tag)) {
          stable_hot += r.HotSize();
          stable_phys += r.PhysicalSize();
        } else {
          unstable_phys += r.PhysicalSize();
          unstable_by_tick[r.tick] += r.PhysicalSize();
        }
      }
    }
    if (!it.status().ok()) return it.status();
  }

  if (at.enabled) {
    stable_hot_size_.store(stable_hot, std::memory_order_relaxed);
    stable_physical_size_.store(stable_phys, std::memory_order_relaxed);
    unstable_physical_size_.store(unstable_phys, std::memory_order_relaxed);
    hot_limit_.store(autotune::HotSetLimit(at, stable_hot), std::memory_order_relaxed);
    const uint64_t every = std::max<uint32_t>(at.physical_update_every, 1);
    if (evictions_.load(std::memory_order_relaxed) % every == 0) {
      physical_limit_.store(autotune::PhysicalLimit(at, stable_phys), std::memory_order_relaxed);
    }
  }
  const double keep = 1.0 - config_.evict_fraction;
  const uint64_t hot_limit = hot_limit_.load(std::memory_order_relaxed);
  const uint64_t phys_limit = physical_limit_.load(std::memory_order_relaxed);

  ScoreThresholds thr;
  thr.ref_tick = ref_tick;
  const auto hot_target = static_cast<uint64_t>(keep * static_cast<double>(hot_limit));
  thr.hot = hot_est.Threshold(hot_target).value_or(RankKey::Lowest());
  thr.physical = RankKey::Lowest();
  if (!at.enabled && total_phys > phys_limit) {
    const auto phys_target = static_cast<uint64_t>(keep * static_cast<double>(phys_limit));
    thr.physical = phys_est.Threshold(phys_target).value_or(RankKey::Lowest());
  }
  thr.physical = std::min(thr.physical, thr.hot);

  // Auto-tuning drops the oldest unstable records, keeping a (1 - beta)
  // share of the unstable budget. Within the cut-off tick the key hash
  // decides, which splits a tick proportionally.
  bool drop_unstable = false;
  uint64_t cut_tick = 0;
  uint64_t cut_hash = 0;
  if (at.enabled) {
    const double budget = keep * static_cast<double>(at.EffectiveUnstableCap());
    if (static_cast<double>(unstable_phys) > budget) {
      drop_unstable = true;
      double acc = 0.0;
      for (auto it = unstable_by_tick.rbegin(); it != unstable_by_tick.rend(); ++it) {
        const double bytes = static_cast<double>(it->second);
        if (acc + bytes > budget) {
          cut_tick = it->first;
          const double frac = std::clamp((budget - acc) / bytes, 0.0, 1.0);
          cut_hash = frac >= 1.0 ? UINT64_MAX
                                 : static_cast<uint64_t>(frac * 18446744073709551616.0);
          break;
        }
        acc += bytes;
      }
    }
  }

  const MergeParams params = merge_params_;
  Transform transform = [=](RaltRecord* r) {
    if (RankOf(*r, thr.ref_tick, params) < thr.physical) return false;
    if (drop_unstable) {
      const uint32_t c = autotune::EffectiveCounter(r->counter, r->epoch, epoch_now);
      if (!autotune::IsStable(c, r->tag)) {
        if (r->tick < cut_tick) return false;
        if (r->tick == cut_tick && HashBytes(r->key, kTiebreakSeed) >= cut_hash) return false;
      }
    }
    return true;
  };
  std::vector<int> sources;
  for (int lv = 0; lv + 1 < config_.num_levels; ++lv) sources.push_back(lv);
  Status s = MergeLevels(sources, config_.num_levels - 1, thr, transform);
  if (!s.ok()) return s;
  evictions_.fetch_add(1, std::memory_order_relaxed);
  return Status::OK();
}

// CLOCK: a hand sweeps keys in order starting at clock_hand_; a visit evicts
// a record whose counter is 0 and decrements it otherwise. The sweep is
// simulated in closed form: after r full rounds every counter below r is gone.
Status Ralt::EvictClockLocked(const std::shared_ptr<const RaltVersion>& v) {
  const std::vector<RaltTableRef> refs = AllRefs(*v);
  const std::string hand = clock_hand_;
  // counter -> (hot bytes before the hand, hot bytes at/after the hand)
  std::map<uint64_t, std::pair<uint64_t, uint64_t>> by_counter;
  uint64_t total_hot = 0;
  uint64_t total_phys = 0;
  {
    RaltMergedIterator it(refs, merge_params_);
    for (; it.Valid(); it.Next()) {
      const RaltRecord& r = it.record();
      auto& slot = by_counter[static_cast<uint64_t>(r.score)];
      (r.key < hand ? slot.first : slot.second) += r.HotSize();
      total_hot += r.HotSize();
      total_phys += r.PhysicalSize();
    }
    if (!it.status().ok()) return it.status();
  }
  const double keep = 1.0 - config_.evict_fraction;
  const auto hot_limit = static_cast<double>(hot_limit_.load(std::memory_order_relaxed));
  const auto phys_limit = static_cast<double>(physical_limit_.load(std::memory_order_relaxed));
  double need = 0.0;
  if (static_cast<double>(total_hot) > hot_limit) {
    need = static_cast<double>(total_hot) - keep * hot_limit;
  }
  if (static_cast<double>(total_phys) > phys_limit && total_phys > 0) {
    const double per_phys = static_cast<double>(total_hot) / static_cast<double>(total_phys);
    need = std::max(need, (static_cast<double>(total_phys) - keep * phys_limit) * per_phys);
  }

  bool evicting = need > 0.0;
  uint64_t rounds = 0;
  double need_after = 0.0;   // bytes to take from the at/after-hand part of round `rounds`
  double need_before = 0.0;  // ... and from the before-hand part
  if (evicting) {
    double acc = 0.0;
    bool found = false;
    for (const auto& [c, bytes] : by_counter) {
      const double here = static_cast<double>(bytes.first + bytes.second);
      if (acc + here >= need) {
        rounds = c;
        const double rest = need - acc;
        need_after = std::min(rest, static_cast<double>(bytes.second));
        need_before = rest - need_after;
        found = true;
        break;
      }
      acc += here;
    }
    if (!found) {
      rounds = by_counter.empty() ? 0 : by_counter.rbegin()->first + 1;
      need_after = need_before = 0.0;
    }
  }

  auto state = std::make_shared<std::pair<double, double>>(need_after, need_before);
  auto new_hand = std::make_shared<std::string>(hand);
  Transform transform = [=](RaltRecord* r) {
    if (!evicting) return true;
    const auto s = static_cast<uint64_t>(r->score);
    if (s < rounds) return false;
    const bool before = r->key < hand;
    double& rem = before ? state->second : state->first;
    // Counters pass the hand once per completed round.
    if (rem > 0.0) {
      if (s == rounds) {
        rem -= static_cast<double>(r->HotSize());
        // The sweep stops in the before part iff it wrapped around.
        if (before == (need_before > 0.0)) *new_hand = r->key;
        return false;
      }
      r->score = static_cast<double>(s - rounds - 1);
      return true;
    }
    // Not reached by the partial round. The at/after part is swept fully
    // when the sweep wrapped around to the before part.
    const bool wrapped = need_before > 0.0;
    if (!before && wrapped) {
      if (s == rounds) return false;
      r->score = static_cast<double>(s - rounds - 1);
      return true;
    }
    r->score = static_cast<double>(s - rounds);
    return true;
  };
  ScoreThresholds thr;
  thr.ref_tick = tick_.load(std::memory_order_relaxed);
  std::vector<int> sources;
  for (int lv = 0; lv + 1 < config_.num_levels; ++lv) sources.push_back(lv);
  Status s = MergeLevels(sources, config_.num_levels - 1, thr, transform);
  if (!s.ok()) return s;
  clock_hand_ = *new_hand;
  evictions_.fetch_add(1, std::memory_order_relaxed);
  return Status::OK();
}

bool Ralt::IsHot(std::string_view key) const {
  auto v = current();
  for (size_t lv = 0; lv < v->levels.size(); ++lv) {
    const auto& level = v->levels[lv];
    if (lv == 0) {
      for (const auto& r : level) {
        if (r.Covers(key) && r.file->table->MayContain(key)) return true;
      }
      continue;
    }
    auto it = std::lower_bound(level.begin(), level.end(), key,
                               [](const RaltTableRef& r, std::string_view k) { return r.largest() < k; });
    if (it != level.end() && it->Covers(key) && it->file->table->MayContain(key)) return true;
  }
  return false;
}

uint64_t Ralt::RangeHotSize(std::string_view lo, std::string_view hi) const {
  if (hi < lo) return 0;
  auto v = current();
  uint64_t total = 0;
  for (const auto& level : v->levels) {
    for (const auto& r : level) {
      if (r.largest() < lo || r.smallest() > hi) continue;
      const Table& t = *r.file->table;
      std::string_view from = lo;
      if (r.after && *r.after > from) from = *r.after;
      // Partial first block excluded, partial last block included; on
      // average the two cancel.
      const size_t start = BlockAtOrAfter(t, from);
      const size_t end = BlockAfter(t, hi);
      if (end > start) total += PrefixAt(t, end) - PrefixAt(t, start);
    }
  }
  return total;
}

RaltHotIterator Ralt::NewHotIterator(std::string lo, std::string hi) const {
  return RaltHotIterator(current(), merge_params_, std::move(lo), std::move(hi));
}

std::vector<HotEntry> Ralt::CollectHot(std::string_view lo, std::string_view hi) const {
  std::vector<HotEntry> out;
  for (auto it = NewHotIterator(std::string(lo), std::string(hi)); it.Valid(); it.Next()) {
    out.push_back(HotEntry{std::string(it.key()), it.hot_size()});
  }
  return out;
}

std::vector<RaltRecord> Ralt::DumpMerged() const {
  auto v = current();
  std::vector<RaltRecord> out;
  for (RaltMergedIterator it(AllRefs(*v), merge_params_); it.Valid(); it.Next()) {
    out.push_back(it.record());
  }
  return out;
}

void Ralt::SetLimits(uint64_t hot_set_size_limit, uint64_t physical_size_limit) {
  hot_limit_.store(hot_set_size_limit, std::memory_order_relaxed);
  physical_limit_.store(physical_size_limit, std::memory_order_relaxed);
}

void Ralt::AdvanceTick(uint64_t ticks) {
  std::lock_guard<std::mutex> l(buffer_mu_);
  tick_.fetch_add(ticks, std::memory_order_relaxed);
}

RaltStats Ralt::GetStats() const {
  RaltStats st;
  auto v = current();
  const size_t last = v->levels.size() - 1;
  {
    std::lock_guard<std::mutex> l(version_mu_);
    // Upper levels mostly repeat keys stored below; weight them by the
    // share found to be new at their last merge.
    double hot_w = 1.0;
    double phys_w = 1.0;
    double est_hot = 0.0;
    double est_phys = 0.0;
    for (size_t i = last + 1; i-- > 0;) {
      if (i < last) {
        hot_w *= hot_fraction_[i];
        phys_w *= phys_fraction_[i];
      }
      est_hot += hot_w * static_cast<double>(v->LevelHotSize(static_cast<int>(i)));
      est_phys += phys_w * static_cast<double>(v->LevelPhysicalSize(static_cast<int>(i)));
    }
    st.estimated_hot_size = static_cast<uint64_t>(est_hot);
    st.estimated_physical_size = static_cast<uint64_t>(est_phys);
  }
  st.hot_size = v->HotSize();
  st.physical_size = v->PhysicalSize();
  st.num_tables = v->NumTables();
  st.hot_set_size_limit = hot_limit_.load(std::memory_order_relaxed);
  st.physical_size_limit = physical_limit_.load(std::memory_order_relaxed);
  st.tick = tick_.load(std::memory_order_relaxed);
  st.decay_epoch = epoch_.load(std::memory_order_relaxed);
  st.logged_accesses = logged_accesses_.load(std::memory_order_relaxed);
  st.flushes = flushes_.load(std::memory_order_relaxed);
  st.compactions = compactions_.load(std::memory_order_relaxed);
  st.evictions = evictions_.load(std::memory_order_relaxed);
  st.stable_hot_size = stable_hot_size_.load(std::memory_order_relaxed);
  st.stable_physical_size = stable_physical_size_.load(std::memory_order_relaxed);
  st.unstable_physical_size = unstable_physical_size_.load(std::memory_order_relaxed);
  const IoStats io = fd_->stats(FileKind::kRalt);
  st.bytes_read = io.bytes_read;
  st.bytes_written = io.bytes_written;
  st.live_file_bytes = live_file_bytes_.load(std::memory_order_relaxed);
  st.peak_file_bytes = peak_file_bytes_.load(std::memory_order_relaxed);
  return st;
}

}  // namespace tierkv
