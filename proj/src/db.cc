#include "tierkv/db.h"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "tierkv/compaction_picker.h"
#include "tierkv/record.h"
#include "tierkv/table.h"

namespace tierkv {

namespace {

constexpr const char* kManifestName = "MANIFEST";
constexpr const char* kManifestHeader = "tierkv-manifest 1";

std::string ToHex(std::string_view s) {
  static const char* kDigits = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

bool FromHex(std::string_view s, std::string* out) {
  if (s.size() % 2 != 0) return false;
  out->clear();
  for (size_t i = 0; i < s.size(); i += 2) {
    unsigned v = 0;
    auto r = std::from_chars(s.data() + i, s.data() + i + 2, v, 16);
    if (r.ec != std::errc() || r.ptr != s.data() + i + 2) return false;
    out->push_back(static_cast<char>(v));
  }
  return true;
}

// Parses "<prefix>-<number>.sst"; returns false for other names.
bool ParseFileName(const std::string& name, const char* prefix, uint64_t* number) {
  const std::string p = std::string(prefix) + "-";
  const std::string suffix = ".sst";
  if (name.size() <= p.size() + suffix.size()) return false;
  if (name.compare(0, p.size(), p) != 0) return false;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
  const char* b = name.data() + p.size();
  const char* e = name.data() + name.size() - suffix.size();
  auto r = std::from_chars(b, e, *number);
  return r.ec == std::errc() && r.ptr == e;
}

// Sorted (key, stored record) pairs of extracted promotion-cache entries.
class VectorIterator final : public Iterator {
 public:
  explicit VectorIterator(const std::vector<std::pair<std::string, std::string>>* rows)
      : rows_(rows) {}
  bool Valid() const override { return pos_ < rows_->size(); }
  void SeekToFirst() override { pos_ = 0; }
  void Seek(std::string_view target) override {
    pos_ = static_cast<size_t>(
        std::lower_bound(rows_->begin(), rows_->end(), target,
                         [](const auto& r, std::string_view k) { return r.first < k; }) -
        rows_->begin());
  }
  void Next() override { ++pos_; }
  std::string_view key() const override { return (*rows_)[pos_].first; }
  std::string_view value() const override { return (*rows_)[pos_].second; }
  Status status() const override { return Status::OK(); }

 private:
  const std::vector<std::pair<std::string, std::string>>* rows_;
  size_t pos_ = 0;
};

bool RangesOverlap(std::string_view lo1, std::string_view hi1, std::string_view lo2,
                   std::string_view hi2) {
  return !(hi1 < lo2 || hi2 < lo1);
}

void SortLevel(std::vector<FileMetaPtr>* files) {
  std::sort(files->begin(), files->end(),
            [](const FileMetaPtr& a, const FileMetaPtr& b) { return a->smallest < b->smallest; });
}

}  // namespace

struct DB::CompactionJob {
  int level = 0;
  int target = 1;
  bool inter_tier = false;
  bool manual = false;
  std::vector<FileMetaPtr> upper;  // inputs from `level`
  std::vector<FileMetaPtr> lower;  // overlapping inputs from `target`
  std::string lo, hi;              // union range
  std::string upper_lo, upper_hi;  // range of the upper inputs
  bool registered_fd_last = false;
  std::vector<std::pair<std::string, PromotionEntry>> extracted;
  // Bytes an inter-tier job may write back to the last FD level.
  uint64_t fd_budget = 0;

  // Results.
  std::vector<FileMetaPtr> target_outputs;
  std::vector<FileMetaPtr> fd_outputs;  // written to the last FD level
  uint64_t bytes_read[2] = {0, 0};
  uint64_t promoted_bytes = 0;
  uint64_t retained_bytes = 0;
};

// Accumulates sorted records into tables of about target_file_size bytes.
struct DB::OutputFile {
  DB* db;
  TierId tier;
  int level;
  std::vector<FileMetaPtr>* files;
  std::unique_ptr<TableBuilder> builder;
  uint64_t bytes = 0;

  OutputFile(DB* d, TierId t, int l, std::vector<FileMetaPtr>* out)
      : db(d), tier(t), level(l), files(out) {}

  Status Add(std::string_view key, std::string_view stored) {
    if (!builder) builder = std::make_unique<TableBuilder>(TableOptions{});
    builder->Add(key, stored);
    if (builder->EstimatedSize() >= db->options_.target_file_size) return Finish();
    return Status::OK();
  }

  Status Finish() {
    if (!builder || builder->empty()) return Status::OK();
    std::unique_ptr<TableBuilder> b = std::move(builder);
    std::string smallest = b->smallest();
    std::string largest = b->largest();
    const uint64_t n = b->num_entries();
    std::string payload = b->Finish(FileKind::kData);
    FileMetaPtr f;
    Status s = db->NewTableFile(tier, level, payload, smallest, largest, n, &f);
    if (!s.ok()) return s;
    bytes += f->file_size;
    files->push_back(std::move(f));
    return Status::OK();
  }
};

DB::DB(const DBOptions& options)
    : options_(options), pc_(options.promotion_cache_seal_bytes) {
  busy_ranges_.resize(static_cast<size_t>(options_.layout.num_levels()));
}

Status DB::Open(const DBOptions& options, std::unique_ptr<DB>* out) {
  Status s = options.Validate();
  if (!s.ok()) return s;
  if (options.layout.num_levels() > kMaxLevels) return Status::InvalidArgument("too many levels");
  std::unique_ptr<DB> db(new DB(options));
  s = db->OpenImpl();
  if (!s.ok()) return s;
  *out = std::move(db);
  return Status::OK();
}

Status DB::OpenImpl() {
  std::error_code ec;
  std::filesystem::create_directories(options_.fd_path, ec);
  if (ec) return Status::IOError("cannot create " + options_.fd_path.string());
  std::filesystem::create_directories(options_.sd_path, ec);
  if (ec) return Status::IOError("cannot create " + options_.sd_path.string());

  // Hotness state is not persisted.
  for (const auto& entry : std::filesystem::directory_iterator(options_.fd_path)) {
    uint64_t n = 0;
    if (ParseFileName(entry.path().filename().string(), "ralt", &n)) {
      std::filesystem::remove(entry.path(), ec);
    }
  }

  Status s = StorageTier::Open(options_.fd_path, TierId::kFD, options_.fd_profile, &fd_);
  if (!s.ok()) return s;
  s = StorageTier::Open(options_.sd_path, TierId::kSD, options_.sd_profile, &sd_);
  if (!s.ok()) return s;

  auto version = std::make_shared<Version>();
  version->levels.resize(static_cast<size_t>(options_.layout.num_levels()));
  sv_ = std::make_shared<SuperVersion>(
      SuperVersion{std::make_shared<MemTable>(next_memtable_id_++), {}, version, 0});
  s = Recover();
  if (!s.ok()) return s;

  ralt_ = std::make_unique<Ralt>(fd_.get(), options_.ralt);

  for (int i = 0; i < options_.background_threads; ++i) {
    workers_.emplace_back([this] { WorkerLoop(); });
  }
  checker_ = std::thread([this] { CheckerLoop(); });
  std::lock_guard l(mu_);
  MaybeScheduleLocked();
  return Status::OK();
}

Status DB::Recover() {
  const auto path = options_.fd_path / kManifestName;
  std::unordered_set<uint64_t> live;
  auto version = std::make_shared<Version>();
  version->levels.resize(static_cast<size_t>(options_.layout.num_levels()));

  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader) {
      return Status::Corruption("bad manifest header");
    }
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "next_file") {
        uint64_t n;
        ls >> n;
        next_file_ = std::max(next_file_.load(), n);
      } else if (tag == "last_seq") {
        uint64_t n;
        ls >> n;
        last_seq_ = n;
      } else if (tag == "creation") {
        uint64_t n;
        ls >> n;
        creation_order_ = n;
      } else if (tag == "table") {
        int level;
        uint64_t number, size, entries, order;
        std::string lo_hex, hi_hex;
        ls >> level >> number >> size >> entries >> order >> lo_hex >> hi_hex;
        if (!ls || level < 0 || level >= options_.layout.num_levels()) {
          return Status::Corruption("bad manifest line: " + line);
        }
        auto f = std::make_shared<FileMeta>();
        f->number = number;
        f->level = level;
        f->tier = options_.layout.TierOf(level);
        f->file_size = size;
        f->num_entries = entries;
        f->creation_order = order;
        if (!FromHex(lo_hex, &f->smallest) || !FromHex(hi_hex, &f->largest)) {
          return Status::Corruption("bad manifest key: " + line);
        }
        StorageTier* tier = f->tier == TierId::kFD ? fd_.get() : sd_.get();
        Status s = tier->AdoptFile(FileKind::kData, number);
        if (!s.ok()) return s;
        s = Table::Open(tier, FileKind::kData, number, &f->table);
        if (!s.ok()) return s;
        f->storage = tier;
        live.insert(number);
        next_file_ = std::max(next_file_.load(), number + 1);
        version->levels[static_cast<size_t>(level)].push_back(std::move(f));
      } else if (!tag.empty()) {
        return Status::Corruption("unknown manifest record: " + tag);
      }
    }
    for (size_t l = 1; l < version->levels.size(); ++l) SortLevel(&version->levels[l]);
    if (!version->LevelsDisjoint()) return Status::Corruption("manifest levels overlap");
  }

  // Files not listed by the manifest are leftovers of unfinished jobs.
  for (const auto& root : {options_.fd_path, options_.sd_path}) {
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      uint64_t n = 0;
      if (ParseFileName(entry.path().filename().string(), "data", &n) && live.count(n) == 0) {
        std::error_code ec;
        std::filesystem::remove(entry.path(), ec);
      }
    }
  }
  sv_ = std::make_shared<SuperVersion>(SuperVersion{sv_->mem, {}, version, 0});
  return Status::OK();
}

Status DB::WriteManifestLocked() {
  const auto v = GetSuperVersion()->version;
  std::ostringstream out;
  out << kManifestHeader << '\n';
  out << "next_file " << next_file_.load() << '\n';
  out << "last_seq " << last_seq_.load() << '\n';
  out << "creation " << creation_order_.load() << '\n';
  for (size_t l = 0; l < v->levels.size(); ++l) {
    for (const auto& f : v->levels[l]) {
      out << "table " << l << ' ' << f->number << ' ' << f->file_size << ' ' << f->num_entries
          << ' ' << f->creation_order << ' ' << ToHex(f->smallest) << ' ' << ToHex(f->largest)
          << '\n';
    }
  }
  const auto path = options_.fd_path / kManifestName;
  const auto tmp = options_.fd_path / (std::string(kManifestName) + ".tmp");
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << out.str();
    f.flush();
    if (!f) return Status::IOError("cannot write manifest");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) return Status::IOError("cannot install manifest: " + ec.message());
  return Status::OK();
}

DB::~DB() { Close(); }

Status DB::Close() {
  {
    std::lock_guard l(mu_);
    if (closed_) return Status::OK();
  }
  {
    std::lock_guard l(checker_mu_);
    checker_stop_ = true;
  }
  checker_cv_.notify_all();
  if (checker_.joinable()) checker_.join();

  Status s;
  {
    std::unique_lock l(mu_);
    paused_ = 0;
  }
  s = Flush();
  {
    std::unique_lock l(mu_);
    shutting_down_ = true;
    bg_cv_.wait(l, [&] { return !flush_running_ && running_compactions_ == 0; });
    closed_ = true;
    Status m = WriteManifestLocked();
    if (s.ok()) s = m;
  }
  {
    std::lock_guard l(pool_mu_);
    pool_stop_ = true;
  }
  pool_cv_.notify_all();
  for (auto& t : workers_) t.join();
  workers_.clear();
  if (ralt_) ralt_->Flush();
  return s;
}

std::shared_ptr<const SuperVersion> DB::GetSuperVersion() const {
  std::lock_guard l(sv_mu_);
  return sv_;
}

void DB::InstallLocked(std::shared_ptr<MemTable> mem, std::vector<std::shared_ptr<MemTable>> imms,
                       std::shared_ptr<const Version> version) {
  auto sv = std::make_shared<SuperVersion>(
      SuperVersion{std::move(mem), std::move(imms), std::move(version), ++sv_number_});
  std::lock_guard l(sv_mu_);
  sv_ = std::move(sv);
}

void DB::SetSdReadHook(std::function<void(std::string_view)> hook) {
  std::lock_guard l(hook_mu_);
  sd_read_hook_ = std::move(hook);
}

// ---------------------------------------------------------------- writes

Status DB::Put(std::string_view key, std::string_view value) {
  return Write(key, ValueKind::kPut, value);
}

Status DB::Delete(std::string_view key) { return Write(key, ValueKind::kDelete, {}); }

Status DB::Write(std::string_view key, ValueKind kind, std::string_view value) {
  std::lock_guard w(write_mu_);
  {
    std::unique_lock l(mu_);
    if (closed_ || shutting_down_) return Status::InvalidArgument("store is closed");
    if (!bg_error_.ok()) return bg_error_;
    MaybeStallLocked(l);
  }
  auto sv = GetSuperVersion();
  const uint64_t seq = last_seq_.load(std::memory_order_relaxed) + 1;
  sv->mem->Add(key, seq, kind, value);
  last_seq_.store(seq, std::memory_order_release);
  if (kind == ValueKind::kPut) {
    counters_.puts.fetch_add(1, std::memory_order_relaxed);
  } else {
    counters_.deletes.fetch_add(1, std::memory_order_relaxed);
  }
  counters_.user_bytes_written.fetch_add(key.size() + value.size(), std::memory_order_relaxed);
  if (sv->mem->ApproximateBytes() >= options_.memtable_size) {
    std::lock_guard l(mu_);
    SwitchMemtableLocked();
  }
  return Status::OK();
}

void DB::MaybeStallLocked(std::unique_lock<std::mutex>& lock) {
  for (;;) {
    if (paused_ > 0 || shutting_down_ || !bg_error_.ok()) return;
    const auto sv = GetSuperVersion();
    const bool too_many_imms =
        static_cast<int>(sv->imms.size()) >= options_.max_immutable_memtables;
    const bool too_many_l0 =
        static_cast<int>(sv->version->levels[0].size()) >= options_.l0_stop_writes_trigger;
    if (!too_many_imms && !too_many_l0) return;
    MaybeScheduleLocked();
    bg_cv_.wait(lock);
  }
}

void DB::SwitchMemtableLocked() {
  const auto cur = GetSuperVersion();
  if (cur->mem->empty()) return;
  // Sealed versions shadow promotion-cache entries of the same keys.
  pc_.RecordUpdatedKeys(cur->mem->Keys());
  std::vector<std::shared_ptr<MemTable>> imms;
  imms.reserve(cur->imms.size() + 1);
  imms.push_back(cur->mem);
  imms.insert(imms.end(), cur->imms.begin(), cur->imms.end());
  InstallLocked(std::make_shared<MemTable>(next_memtable_id_++), std::move(imms), cur->version);
  MaybeScheduleLocked();
}

// ----------------------------------------------------------------- reads

void DB::LogAccess(std::string_view key, size_t value_len) {
  if (options_.enable_ralt) ralt_->LogAccess(key, value_len);
}

Status DB::Get(std::string_view key, std::string* value, AccessOrigin* origin) {
  counters_.gets.fetch_add(1, std::memory_order_relaxed);
  AccessOrigin local;
  AccessOrigin* o = origin != nullptr ? origin : &local;
  *o = AccessOrigin{};

  // Sampled before pinning so that compactions into SD set up later are
  // visible to the insert check.
  const uint64_t read_epoch = pc_.CompactionEpoch();
  const auto sv = GetSuperVersion();

  MemTable::Entry e;
  bool found = sv->mem->Get(key, &e);
  if (!found) {
    MemTable::Entry cand;
    for (const auto& imm : sv->imms) {
      if (imm->Get(key, &cand) && (!found || cand.seqno > e.seqno)) {
        e = std::move(cand);
        found = true;
      }
    }
  }
  if (found) {
    if (e.kind == ValueKind::kDelete) {
      counters_.get_not_found.fetch_add(1, std::memory_order_relaxed);
      return Status::NotFound();
    }
    o->kind = AccessOriginKind::kMemtable;
    counters_.get_memtable.fetch_add(1, std::memory_order_relaxed);
    LogAccess(key, e.value.size());
    *value = std::move(e.value);
    return Status::OK();
  }

  bool deleted = false;
  Status s;
  found = GetFromTables(*sv, key, value, o, read_epoch, &deleted, &s);
  if (!s.ok()) return s;
  if (!found || deleted) {
    o->kind = AccessOriginKind::kNotFound;
    o->level = -1;
    counters_.get_not_found.fetch_add(1, std::memory_order_relaxed);
    return Status::NotFound();
  }
  return Status::OK();
}

bool DB::GetFromTables(const SuperVersion& sv, std::string_view key, std::string* value,
                       AccessOrigin* o, uint64_t read_epoch, bool* deleted, Status* status) {
  const Version& v = *sv.version;
  const LevelLayout& layout = options_.layout;
  std::string stored;
  RecordView rec;

  auto lookup = [&](const FileMeta& f, std::string* out) -> bool {
    bool hit = false;
    Status s = f.table->Get(key, out, &hit);
    if (!s.ok()) {
      *status = s;
      return false;
    }
    if (hit && !DecodeRecordValue(*out, &rec)) {
      *status = Status::Corruption("bad record in table " + std::to_string(f.number));
      return false;
    }
    return hit;
  };

  auto fd_hit = [&](int level, const std::string& raw) {
    RecordView r;
    DecodeRecordValue(raw, &r);
    o->kind = AccessOriginKind::kFdLevel;
    o->level = level;
    if (r.kind == ValueKind::kDelete) {
      *deleted = true;
      return true;
    }
    counters_.get_fd_levels.fetch_add(1, std::memory_order_relaxed);
    counters_.get_level[static_cast<size_t>(level)].fetch_add(1, std::memory_order_relaxed);
    value->assign(r.value);
    LogAccess(key, r.value.size());
    return true;
  };

  // L0 tables may overlap; the newest version among them wins.
  std::string best;
  uint64_t best_seq = 0;
  bool have = false;
  for (const auto& f : v.levels[0]) {
    if (key < f->smallest || key > f->largest) continue;
    if (lookup(*f, &stored)) {
      if (!have || rec.seqno > best_seq) {
        best_seq = rec.seqno;
        best = stored;
        have = true;
      }
    } else if (!status->ok()) {
      return false;
    }
  }
  if (have) return fd_hit(0, best);

  for (int level = 1; level <= layout.fd_last_level(); ++level) {
    const FileMetaPtr* f = v.FindFile(level, key);
    if (f == nullptr) continue;
    if (lookup(**f, &stored)) return fd_hit(level, stored);
    if (!status->ok()) return false;
  }

  uint64_t pc_seq = 0;
  if (pc_.Get(key, value, &pc_seq)) {
    o->kind = AccessOriginKind::kPromotionCache;
    counters_.get_promotion_cache.fetch_add(1, std::memory_order_relaxed);
    LogAccess(key, value->size());
    return true;
  }

  std::vector<FileMetaPtr> sources;
  for (int level = layout.sd_first_level(); level <= layout.bottommost_level(); ++level) {
    const FileMetaPtr* f = v.FindFile(level, key);
    if (f == nullptr) continue;
    sources.push_back(*f);
    if (lookup(**f, &stored)) {
      o->kind = AccessOriginKind::kSdLevel;
      o->level = level;
      if (rec.kind == ValueKind::kDelete) {
        *deleted = true;
        return true;
      }
      counters_.get_sd_levels.fetch_add(1, std::memory_order_relaxed);
      counters_.get_level[static_cast<size_t>(level)].fetch_add(1, std::memory_order_relaxed);
      value->assign(rec.value);
      MaybePromote(key, rec.value, rec.seqno, std::move(sources), read_epoch);
      return true;
    }
    if (!status->ok()) return false;
  }
  return false;
}

void DB::MaybePromote(std::string_view key, std::string_view value, uint64_t seqno,
                      std::vector<FileMetaPtr> sources, uint64_t read_epoch) {
  if (!options_.enable_promotion_by_flush && !options_.enable_promotion_by_compaction) {
    LogAccess(key, value.size());
    return;
  }
  {
    std::lock_guard l(hook_mu_);
    if (sd_read_hook_) sd_read_hook_(key);
  }
  const InsertResult r = pc_.TryInsert(key, value, seqno, sources, read_epoch);
  if (r != InsertResult::kInserted) {
    // Not staged, so no later pathway would log this access.
    LogAccess(key, value.size());
    return;
  }
  if (pc_.NeedsSeal()) SealPromotionCacheImpl(false);
}

void DB::SealPromotionCache() { SealPromotionCacheImpl(true); }

void DB::SealPromotionCacheImpl(bool force) {
  std::lock_guard l(mu_);
  if (!force && !pc_.NeedsSeal()) return;
  auto ipc = pc_.Seal(GetSuperVersion());
  if (!ipc) return;
  {
    std::lock_guard c(checker_mu_);
    checker_queue_.push_back(std::move(ipc));
  }
  checker_cv_.notify_one();
}

bool DB::NewerExists(const SuperVersion& sv, std::string_view key, uint64_t seqno) const {
  if (sv.mem->SeqnoOf(key) >= seqno) return true;
  for (const auto& imm : sv.imms) {
    if (imm->SeqnoOf(key) >= seqno) return true;
  }
  const Version& v = *sv.version;
  std::string stored;
  RecordView rec;
  auto check = [&](const FileMeta& f) {
    bool hit = false;
    Status s = f.table->Get(key, &stored, &hit);
    // An unreadable table cannot prove the entry fresh.
    if (!s.ok()) return true;
    return hit && DecodeRecordValue(stored, &rec) && rec.seqno >= seqno;
  };
  for (const auto& f : v.levels[0]) {
    if (key >= f->smallest && key <= f->largest && check(*f)) return true;
  }
  for (int level = 1; level <= options_.layout.fd_last_level(); ++level) {
    const FileMetaPtr* f = v.FindFile(level, key);
    if (f != nullptr && check(**f)) return true;
  }
  return false;
}

// ---------------------------------------------------------------- checker

void DB::CheckerLoop() {
  for (;;) {
    std::shared_ptr<ImmutablePromotionCache> ipc;
    {
      std::unique_lock l(checker_mu_);
      checker_cv_.wait(l, [&] { return checker_stop_ || !checker_queue_.empty(); });
      if (checker_stop_) {
        // Sealed caches are only copies of SD data; dropping them is safe.
        for (const auto& p : checker_queue_) pc_.RemoveImmutable(p->id);
        checker_queue_.clear();
        return;
      }
      ipc = std::move(checker_queue_.front());
      checker_queue_.pop_front();
      checker_busy_ = true;
    }
    CheckSealed(ipc);
    {
      std::lock_guard l(checker_mu_);
      checker_busy_ = false;
    }
    bg_cv_.notify_all();
  }
}

void DB::CheckSealed(const std::shared_ptr<ImmutablePromotionCache>& ipc) {
  std::vector<std::pair<std::string, PromotionEntry>> survivors;
  for (const auto& [key, entry] : ipc->entries) {
    const bool hot = options_.promote_accessed || (options_.enable_ralt && ralt_->IsHot(key));
    LogAccess(key, entry.value.size());
    if (!hot || !options_.enable_promotion_by_flush) continue;
    if (NewerExists(*ipc->snapshot, key, entry.seqno)) continue;
    survivors.emplace_back(key, entry);
  }

  std::lock_guard l(mu_);
  pc_.FilterUpdated(*ipc, &survivors);
  if (!survivors.empty() && !shutting_down_) {
    auto promo = std::make_shared<MemTable>(next_memtable_id_++, /*promotion=*/true);
    uint64_t bytes = 0;
    for (const auto& [key, entry] : survivors) {
      promo->Add(key, entry.seqno, ValueKind::kPut, entry.value);
      bytes += key.size() + entry.value.size();
    }
    const auto cur = GetSuperVersion();
    std::vector<std::shared_ptr<MemTable>> imms;
    imms.reserve(cur->imms.size() + 1);
    imms.push_back(std::move(promo));
    imms.insert(imms.end(), cur->imms.begin(), cur->imms.end());
    InstallLocked(cur->mem, std::move(imms), cur->version);
    counters_.promoted_bytes_flush.fetch_add(bytes, std::memory_order_relaxed);
    MaybeScheduleLocked();
  }
  pc_.RemoveImmutable(ipc->id);
}

// ------------------------------------------------------------ scheduling

void DB::Submit(std::function<void()> fn) {
  {
    std::lock_guard l(pool_mu_);
    pool_queue_.push_back(std::move(fn));
  }
  pool_cv_.notify_one();
}

void DB::WorkerLoop() {
  for (;;) {
    std::function<void()> fn;
    {
      std::unique_lock l(pool_mu_);
      pool_cv_.wait(l, [&] { return pool_stop_ || !pool_queue_.empty(); });
      if (pool_queue_.empty()) return;
      fn = std::move(pool_queue_.front());
      pool_queue_.pop_front();
    }
    fn();
  }
}

void DB::MaybeScheduleLocked() {
  if (paused_ > 0 || !bg_error_.ok() || closed_) return;
  const auto sv = GetSuperVersion();
  if (!flush_running_ && !sv->imms.empty()) {
    flush_running_ = true;
    Submit([this] { BackgroundFlush(); });
  }
  if (options_.disable_auto_compactions || shutting_down_) return;
  const int max_jobs = std::max(1, options_.background_threads - 1);
  while (running_compactions_ < max_jobs) {
    auto job = PickCompactionLocked(-1);
    if (!job) break;
    ++running_compactions_;
    std::shared_ptr<CompactionJob> shared(job.release());
    Submit([this, shared]() mutable {
      BackgroundCompaction(std::unique_ptr<CompactionJob>(new CompactionJob(std::move(*shared))));
    });
  }
}

void DB::PauseBackgroundWork() {
  std::unique_lock l(mu_);
  ++paused_;
  bg_cv_.wait(l, [&] { return !flush_running_ && running_compactions_ == 0; });
}

void DB::ContinueBackgroundWork() {
  std::lock_guard l(mu_);
  if (paused_ > 0) --paused_;
  MaybeScheduleLocked();
  bg_cv_.notify_all();
}

void DB::WaitForIdle() {
  std::unique_lock l(mu_);
  for (;;) {
    if (paused_ > 0 || !bg_error_.ok() || closed_) return;
    MaybeScheduleLocked();
    bool checker_idle;
    {
      std::lock_guard c(checker_mu_);
      checker_idle = !checker_busy_ && checker_queue_.empty();
    }
    if (checker_idle && !flush_running_ && running_compactions_ == 0 &&
        GetSuperVersion()->imms.empty()) {
      return;
    }
    bg_cv_.wait_for(l, std::chrono::milliseconds(5));
  }
}

Status DB::Flush() {
  {
    std::lock_guard w(write_mu_);
    std::lock_guard l(mu_);
    SwitchMemtableLocked();
  }
  std::unique_lock l(mu_);
  for (;;) {
    if (!bg_error_.ok()) return bg_error_;
    if (GetSuperVersion()->imms.empty()) return Status::OK();
    if (paused_ > 0) return Status::Busy("background work is paused");
    MaybeScheduleLocked();
    bg_cv_.wait_for(l, std::chrono::milliseconds(5));
  }
}

// ----------------------------------------------------------------- flush

Status DB::NewTableFile(TierId tier_id, int level, const std::string& payload,
                        const std::string& smallest, const std::string& largest,
                        uint64_t num_entries, FileMetaPtr* out) {
  StorageTier* tier = tier_id == TierId::kFD ? fd_.get() : sd_.get();
  const uint64_t number = NextFileNumber();
  Status s = tier->WriteFile(FileKind::kData, number, payload);
  if (!s.ok()) return s;
  auto f = std::make_shared<FileMeta>();
  f->number = number;
  f->tier = tier_id;
  f->level = level;
  f->smallest = smallest;
  f->largest = largest;
  f->file_size = tier->FileSize(FileKind::kData, number);
  f->num_entries = num_entries;
  f->creation_order = creation_order_.fetch_add(1);
  f->storage = tier;
  s = Table::Open(tier, FileKind::kData, number, &f->table);
  if (!s.ok()) {
    f->obsolete = true;
    return s;
  }
  *out = std::move(f);
  return Status::OK();
}

Status DB::FlushMemTable(const MemTable& mem, FileMetaPtr* out) {
  out->reset();
  const auto& entries = mem.sealed_entries();
  if (entries.empty()) return Status::OK();
  TableBuilder builder{TableOptions{}};
  for (const auto& [key, e] : entries) {
    builder.Add(key, EncodeRecordValue(e.seqno, e.kind, e.value));
  }
  std::string smallest = builder.smallest();
  std::string largest = builder.largest();
  const uint64_t n = builder.num_entries();
  return NewTableFile(TierId::kFD, 0, builder.Finish(FileKind::kData), smallest, largest, n, out);
}

void DB::BackgroundFlush() {
  std::shared_ptr<MemTable> imm;
  {
    std::lock_guard l(mu_);
    const auto sv = GetSuperVersion();
    if (sv->imms.empty()) {
      flush_running_ = false;
      bg_cv_.notify_all();
      return;
    }
    imm = sv->imms.back();
  }
  FileMetaPtr f;
  Status s = FlushMemTable(*imm, &f);

  std::lock_guard l(mu_);
  flush_running_ = false;
  if (!s.ok()) {
    bg_error_ = s;
  } else {
    const auto cur = GetSuperVersion();
    std::shared_ptr<const Version> version = cur->version;
    if (f) {
      auto nv = std::make_shared<Version>(*cur->version);
      nv->levels[0].push_back(f);
      version = std::move(nv);
      counters_.flushes.fetch_add(1, std::memory_order_relaxed);
      counters_.flush_bytes_written.fetch_add(f->file_size, std::memory_order_relaxed);
    }
    std::vector<std::shared_ptr<MemTable>> imms;
    for (const auto& m : cur->imms) {
      if (m != imm) imms.push_back(m);
    }
    InstallLocked(cur->mem, std::move(imms), std::move(version));
    if (f) s = WriteManifestLocked();
    if (!s.ok()) bg_error_ = s;
  }
  MaybeScheduleLocked();
  bg_cv_.notify_all();
}

// ------------------------------------------------------------ compaction

double DB::LevelScoreLocked(const Version& v, int level) const {
  const auto& files = v.levels[static_cast<size_t>(level)];
  if (level == 0) {
    if (l0_compaction_running_) return 0.0;
    return static_cast<double>(files.size()) / options_.l0_compaction_trigger;
  }
  if (level >= options_.layout.bottommost_level()) return 0.0;
  uint64_t bytes = 0;
  for (const auto& f : files) {
    if (!f->being_compacted.load()) bytes += f->file_size;
  }
  return static_cast<double>(bytes) / static_cast<double>(options_.layout.Target(level));
}

std::unique_ptr<DB::CompactionJob> DB::PickCompactionLocked(int only_level) {
  const auto sv = GetSuperVersion();
  const Version& v = *sv->version;
  const LevelLayout& layout = options_.layout;

  std::vector<std::pair<double, int>> order;
  if (only_level >= 0) {
    if (only_level >= layout.bottommost_level()) return nullptr;
    order.emplace_back(1.0, only_level);
  } else {
    for (int level = 0; level < layout.bottommost_level(); ++level) {
      // Levels >= 1 must exceed their target, so a write-back that refills
      // a level to exactly its target does not trigger another job.
      const double score = LevelScoreLocked(v, level);
      if (level == 0 ? score >= 1.0 : score > 1.0) order.emplace_back(score, level);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
  }

  auto range_free = [&](int level, std::string_view lo, std::string_view hi) {
    for (const auto& [blo, bhi] : busy_ranges_[static_cast<size_t>(level)]) {
      if (RangesOverlap(lo, hi, blo, bhi)) return false;
    }
    return true;
  };
  auto any_busy = [](const std::vector<FileMetaPtr>& files) {
    return std::any_of(files.begin(), files.end(),
                       [](const FileMetaPtr& f) { return f->being_compacted.load(); });
  };

  for (const auto& [score, level] : order) {
    const auto& files = v.levels[static_cast<size_t>(level)];
    if (files.empty()) continue;
    if (level == 0) {
      if (l0_compaction_running_ || any_busy(files)) continue;
      std::string lo = files.front()->smallest, hi = files.front()->largest;
      for (const auto& f : files) {
        lo = std::min(lo, f->smallest);
        hi = std::max(hi, f->largest);
      }
      auto lower = v.Overlapping(1, lo, hi);
      if (any_busy(lower) || !range_free(1, lo, hi)) continue;
      return SetupJobLocked(0, files, std::move(lower));
    }

    const bool inter_tier = level == layout.fd_last_level();
    std::vector<CompactionCandidate> cands;
    std::vector<std::pair<FileMetaPtr, std::vector<FileMetaPtr>>> picks;
    for (const auto& f : files) {
      if (f->being_compacted.load()) continue;
      auto lower = v.Overlapping(level + 1, f->smallest, f->largest);
      if (any_busy(lower)) continue;
      std::string lo = f->smallest, hi = f->largest;
      if (!lower.empty()) {
        lo = std::min(lo, lower.front()->smallest);
        hi = std::max(hi, lower.back()->largest);
      }
      if (!range_free(level + 1, lo, hi)) continue;
      if (inter_tier && !range_free(level, f->smallest, f->largest)) continue;
      CompactionCandidate c;
      c.file_size = f->file_size;
      for (const auto& g : lower) c.overlapping_bytes += g->file_size;
      c.inter_tier = inter_tier;
      c.hot_size = inter_tier && options_.enable_retention && options_.enable_ralt
                       ? ralt_->RangeHotSize(f->smallest, f->largest)
                       : 0;
      c.creation_order = f->creation_order;
      cands.push_back(c);
      picks.emplace_back(f, std::move(lower));
    }
    if (cands.empty()) continue;
    const std::optional<size_t> idx = PickCandidate(&cands);
    if (!idx) continue;
    return SetupJobLocked(level, {picks[*idx].first}, std::move(picks[*idx].second));
  }
  return nullptr;
}

std::unique_ptr<DB::CompactionJob> DB::SetupJobLocked(int level, std::vector<FileMetaPtr> upper,
                                                      std::vector<FileMetaPtr> lower) {
  const LevelLayout& layout = options_.layout;
  auto job = std::make_unique<CompactionJob>();
  job->level = level;
  job->target = level + 1;
  job->inter_tier = level == layout.fd_last_level();
  job->upper = std::move(upper);
  job->lower = std::move(lower);
  job->upper_lo = job->upper.front()->smallest;
  job->upper_hi = job->upper.front()->largest;
  for (const auto& f : job->upper) {
    job->upper_lo = std::min(job->upper_lo, f->smallest);
    job->upper_hi = std::max(job->upper_hi, f->largest);
  }
  job->lo = job->upper_lo;
  job->hi = job->upper_hi;
  for (const auto& f : job->lower) {
    job->lo = std::min(job->lo, f->smallest);
    job->hi = std::max(job->hi, f->largest);
  }

  std::vector<FileMetaPtr> all = job->upper;
  all.insert(all.end(), job->lower.begin(), job->lower.end());
  for (const auto& f : all) {
    f->being_compacted = true;
    job->bytes_read[static_cast<int>(f->tier)] += f->file_size;
  }
  busy_ranges_[static_cast<size_t>(job->target)].emplace_back(job->lo, job->hi);
  if (job->inter_tier) {
    busy_ranges_[static_cast<size_t>(level)].emplace_back(job->upper_lo, job->upper_hi);
    job->registered_fd_last = true;
  }
  if (level == 0) l0_compaction_running_ = true;
  if (job->inter_tier) {
    for (const auto& f : job->upper) job->fd_budget += f->file_size;
  }

  pc_.MarkCompaction(all, job->inter_tier, job->lo, job->hi);
  if (options_.enable_promotion_by_compaction &&
      (job->inter_tier || job->target == layout.fd_last_level())) {
    const std::string& lo = job->inter_tier ? job->upper_lo : job->lo;
    const std::string& hi = job->inter_tier ? job->upper_hi : job->hi;
    job->extracted = pc_.Extract(lo, hi);
  }
  return job;
}

Status DB::RunCompaction(CompactionJob* job) {
  const LevelLayout& layout = options_.layout;
  const TierId target_tier = layout.TierOf(job->target);
  const bool bottommost = job->target == layout.bottommost_level();
  const bool retain = job->inter_tier && options_.enable_retention && options_.enable_ralt;

  // Hotness of extracted promotion-cache entries: consult, then log.
  std::vector<std::pair<std::string, std::string>> pc_rows;
  pc_rows.reserve(job->extracted.size());
  for (const auto& [key, entry] : job->extracted) {
    const bool hot = options_.promote_accessed || (options_.enable_ralt && ralt_->IsHot(key));
    LogAccess(key, entry.value.size());
    if (hot) pc_rows.emplace_back(key, EncodeRecordValue(entry.seqno, ValueKind::kPut, entry.value));
  }

  std::vector<std::unique_ptr<Iterator>> children;
  std::vector<bool> child_upper;
  for (const auto& f : job->upper) {
    children.push_back(f->table->NewIterator());
    child_upper.push_back(true);
  }
  for (const auto& f : job->lower) {
    children.push_back(f->table->NewIterator());
    child_upper.push_back(false);
  }
  const int pc_child = static_cast<int>(children.size());
  children.push_back(std::make_unique<VectorIterator>(&pc_rows));
  child_upper.push_back(false);
  MergingIterator it(std::move(children));
  it.SeekToFirst();

  std::optional<RaltHotIterator> hot_it;
  if (retain) {
    // Every job must shrink the level or an all-hot level would be
    // rewritten forever. An input with a cold record sinks at least that
    // record, so all hot ones may stay. An all-hot input may refill the
    // level only up to its target, less an eighth since the budget counts
    // file bytes and tables carry overhead.
    bool all_hot = true;
    RaltHotIterator probe = ralt_->NewHotIterator(job->upper_lo, job->upper_hi);
    for (const auto& f : job->upper) {
      auto t = f->table->NewIterator();
      for (t->SeekToFirst(); t->Valid() && all_hot; t->Next()) {
        while (probe.Valid() && probe.key() < t->key()) probe.Next();
        all_hot = probe.Valid() && probe.key() == t->key();
      }
      if (!all_hot) break;
      probe = ralt_->NewHotIterator(job->upper_lo, job->upper_hi);
    }
    if (all_hot) {
      const uint64_t input = job->fd_budget;
      const uint64_t room = options_.layout.Target(job->level) + input;
      const uint64_t size = GetSuperVersion()->version->LevelBytes(job->level);
      const uint64_t budget = std::min(room > size ? room - size : 0, input);
      job->fd_budget = budget - budget / 8;
    }
    hot_it.emplace(ralt_->NewHotIterator(job->upper_lo, job->upper_hi));
  }

  OutputFile target_out(this, target_tier, job->target, &job->target_outputs);
  OutputFile fd_out(this, TierId::kFD, layout.fd_last_level(), &job->fd_outputs);
  OutputFile* promote_out = target_tier == TierId::kFD ? &target_out : &fd_out;

  auto fd_room = [&](size_t n) {
    if (!job->inter_tier) return true;
    const uint64_t pending = fd_out.builder ? fd_out.builder->EstimatedSize() : 0;
    return fd_out.bytes + pending + n <= job->fd_budget;
  };

  std::string key, best, pc_copy;
  RecordView rec;
  Status s;
  while (it.Valid() && s.ok()) {
    key.assign(it.key());
    uint64_t best_seq = 0, pc_seq = 0;
    bool have = false, have_pc = false, best_upper = false;
    for (; it.Valid() && it.key() == key; it.Next()) {
      if (!DecodeRecordValue(it.value(), &rec)) {
        s = Status::Corruption("bad record during compaction");
        break;
      }
      const int child = it.current_child();
      if (child == pc_child) {
        pc_copy.assign(it.value());
        pc_seq = rec.seqno;
        have_pc = true;
      } else if (!have || rec.seqno > best_seq) {
        best.assign(it.value());
        best_seq = rec.seqno;
        best_upper = child_upper[static_cast<size_t>(child)];
        have = true;
      }
    }
    if (!s.ok()) break;
    s = it.status();
    if (!s.ok()) break;

    // A promoted copy at least as new as every input version goes to FD.
    // Over budget it is dropped; SD still holds that version.
    if (have_pc && (!have || pc_seq >= best_seq) && fd_room(key.size() + pc_copy.size())) {
      DecodeRecordValue(pc_copy, &rec);
      s = promote_out->Add(key, pc_copy);
      job->promoted_bytes += key.size() + rec.value.size();
      continue;
    }
    if (!have || (have_pc && pc_seq > best_seq)) continue;

    DecodeRecordValue(best, &rec);
    if (rec.kind == ValueKind::kDelete) {
      if (!bottommost) s = target_out.Add(key, best);
      continue;
    }
    bool hot = false;
    if (retain && best_upper) {
      while (hot_it->Valid() && hot_it->key() < key) hot_it->Next();
      hot = hot_it->Valid() && hot_it->key() == key;
    }
    if (hot && fd_room(key.size() + best.size())) {
      s = fd_out.Add(key, best);
      job->retained_bytes += key.size() + rec.value.size();
    } else {
      s = target_out.Add(key, best);
    }
  }
  if (s.ok()) s = it.status();
  if (s.ok()) s = target_out.Finish();
  if (s.ok()) s = fd_out.Finish();
  return s;
}

void DB::FinishCompactionLocked(CompactionJob* job, const Status& s) {
  auto drop_range = [&](int level, const std::string& lo, const std::string& hi) {
    auto& ranges = busy_ranges_[static_cast<size_t>(level)];
    auto pos = std::find(ranges.begin(), ranges.end(), std::make_pair(lo, hi));
    if (pos != ranges.end()) ranges.erase(pos);
  };
  drop_range(job->target, job->lo, job->hi);
  if (job->registered_fd_last) drop_range(job->level, job->upper_lo, job->upper_hi);
  if (job->level == 0) l0_compaction_running_ = false;

  if (!s.ok()) {
    for (const auto& f : job->upper) f->being_compacted = false;
    for (const auto& f : job->lower) f->being_compacted = false;
    for (const auto& f : job->target_outputs) f->obsolete = true;
    for (const auto& f : job->fd_outputs) f->obsolete = true;
    bg_error_ = s;
    return;
  }

  const auto cur = GetSuperVersion();
  auto nv = std::make_shared<Version>(*cur->version);
  auto remove = [&](const std::vector<FileMetaPtr>& inputs, int level) {
    auto& files = nv->levels[static_cast<size_t>(level)];
    for (const auto& f : inputs) {
      auto pos = std::find(files.begin(), files.end(), f);
      if (pos != files.end()) files.erase(pos);
      f->obsolete = true;
    }
  };
  remove(job->upper, job->level);
  remove(job->lower, job->target);
  auto add = [&](const std::vector<FileMetaPtr>& outputs, int level) {
    auto& files = nv->levels[static_cast<size_t>(level)];
    files.insert(files.end(), outputs.begin(), outputs.end());
    SortLevel(&files);
  };
  add(job->target_outputs, job->target);
  add(job->fd_outputs, options_.layout.fd_last_level());
  assert(nv->LevelsDisjoint());
  InstallLocked(cur->mem, cur->imms, std::move(nv));

  uint64_t written[2] = {0, 0};
  for (const auto& f : job->target_outputs) written[static_cast<int>(f->tier)] += f->file_size;
  uint64_t fd_written = 0;
  for (const auto& f : job->fd_outputs) fd_written += f->file_size;
  written[0] += fd_written;
  counters_.compactions.fetch_add(1, std::memory_order_relaxed);
  for (int t = 0; t < 2; ++t) {
    counters_.compaction_bytes_written[t].fetch_add(written[t], std::memory_order_relaxed);
    counters_.compaction_bytes_read[t].fetch_add(job->bytes_read[t], std::memory_order_relaxed);
  }
  counters_.promoted_bytes_compaction.fetch_add(job->promoted_bytes, std::memory_order_relaxed);
  counters_.retained_bytes.fetch_add(job->retained_bytes, std::memory_order_relaxed);
  if (job->inter_tier) {
    uint64_t fd_in = 0;
    for (const auto& f : job->upper) fd_in += f->file_size;
    counters_.inter_tier_compactions.fetch_add(1, std::memory_order_relaxed);
    counters_.inter_tier_input_fd_bytes.fetch_add(fd_in, std::memory_order_relaxed);
    counters_.inter_tier_bytes_to_sd.fetch_add(written[1], std::memory_order_relaxed);
    counters_.inter_tier_bytes_to_fd.fetch_add(fd_written, std::memory_order_relaxed);
  }
  Status m = WriteManifestLocked();
  if (!m.ok()) bg_error_ = m;
}

void DB::BackgroundCompaction(std::unique_ptr<CompactionJob> job) {
  Status s = RunCompaction(job.get());
  std::lock_guard l(mu_);
  FinishCompactionLocked(job.get(), s);
  --running_compactions_;
  job.reset();
  MaybeScheduleLocked();
  bg_cv_.notify_all();
}

Status DB::CompactLevel(int level) {
  if (level < 0 || level >= options_.layout.bottommost_level()) {
    return Status::InvalidArgument("level has no next level");
  }
  std::unique_ptr<CompactionJob> job;
  {
    std::lock_guard l(mu_);
    if (closed_) return Status::InvalidArgument("store is closed");
    job = PickCompactionLocked(level);
    if (!job) return Status::NotFound("nothing to compact");
    ++running_compactions_;
  }
  Status s = RunCompaction(job.get());
  std::lock_guard l(mu_);
  FinishCompactionLocked(job.get(), s);
  --running_compactions_;
  job.reset();
  MaybeScheduleLocked();
  bg_cv_.notify_all();
  return s;
}

// --------------------------------------------------------------- metrics

RunMetrics DB::GetMetrics() const {
  RunMetrics m;
  const auto& c = counters_;
  auto ld = [](const std::atomic<uint64_t>& a) { return a.load(std::memory_order_relaxed); };
  m.gets = ld(c.gets);
  m.get_memtable = ld(c.get_memtable);
  m.get_promotion_cache = ld(c.get_promotion_cache);
  m.get_fd_levels = ld(c.get_fd_levels);
  m.get_sd_levels = ld(c.get_sd_levels);
  m.get_not_found = ld(c.get_not_found);
  for (int i = 0; i < kMaxLevels; ++i) m.get_level[i] = ld(c.get_level[i]);
  m.puts = ld(c.puts);
  m.deletes = ld(c.deletes);
  m.user_bytes_written = ld(c.user_bytes_written);
  m.promoted_bytes_flush = ld(c.promoted_bytes_flush);
  m.promoted_bytes_compaction = ld(c.promoted_bytes_compaction);
  m.retained_bytes = ld(c.retained_bytes);
  m.cache_inserts = pc_.inserts();
  m.cache_insert_aborts = pc_.aborts();
  m.flushes = ld(c.flushes);
  m.flush_bytes_written = ld(c.flush_bytes_written);
  m.compactions = ld(c.compactions);
  for (int t = 0; t < 2; ++t) {
    m.compaction_bytes_written[t] = ld(c.compaction_bytes_written[t]);
    m.compaction_bytes_read[t] = ld(c.compaction_bytes_read[t]);
  }
  m.inter_tier_compactions = ld(c.inter_tier_compactions);
  m.inter_tier_input_fd_bytes = ld(c.inter_tier_input_fd_bytes);
  m.inter_tier_bytes_to_sd = ld(c.inter_tier_bytes_to_sd);
  m.inter_tier_bytes_to_fd = ld(c.inter_tier_bytes_to_fd);
  m.tier_io[0] = fd_->stats(FileKind::kData);
  m.tier_io[1] = sd_->stats(FileKind::kData);
  const IoStats rio = fd_->stats(FileKind::kRalt);
  m.ralt_bytes_io = rio.bytes_read + rio.bytes_written;
  if (ralt_) {
    const RaltStats rs = ralt_->GetStats();
    m.ralt_hot_set_limit = rs.hot_set_size_limit;
    m.ralt_physical_limit = rs.physical_size_limit;
    m.ralt_hot_size = rs.hot_size;
    m.ralt_physical_size = rs.physical_size;
  }
  return m;
}

}  // namespace tierkv
