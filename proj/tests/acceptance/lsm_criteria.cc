#include <algorithm>
#include <cmath>

#include "acceptance.h"
#include "tierkv/compaction_picker.h"
#include "workload.h"

namespace fs = std::filesystem;

namespace tierkv::acceptance {

namespace {

// Retention write amplification.
constexpr double kSizeRatio = 10;
constexpr double kWaFactor = 2.0;  // accepted band around T / (2p)
// Compaction picker liveness.
constexpr uint64_t kMaxLivenessCompactions = 100;

struct WaPoint {
  double p = 0;
  double measured = 0;
  double expected = 0;
};

// Last FD level of 4 MiB with a fraction 1-p of it pinned hot; cold unique
// keys stream through and are measured once SD holds about T times the FD
// level.
Status MeasureRetentionWa(Context& ctx, double p, WaPoint* out) {
  const fs::path dir = ctx.NewDir("retention");
  DBOptions o;
  o.fd_path = dir / "fd";
  o.sd_path = dir / "sd";
  fs::create_directories(o.fd_path);
  fs::create_directories(o.sd_path);
  constexpr uint64_t kFdLast = 4 << 20;
  o.layout.fd_levels = 1;
  o.layout.sd_levels = 2;
  o.layout.size_ratio = kSizeRatio;
  o.layout.fd_last_level_target = kFdLast;
  o.layout.sd_first_level_target = static_cast<uint64_t>(kSizeRatio * kFdLast);
  o.memtable_size = 64 << 10;
  o.target_file_size = 64 << 10;
  o.ralt.background = false;
  o.ralt.hot_set_size_limit = 1ull << 40;
  o.ralt.physical_size_limit = 1ull << 40;
  // RALT blocks small against the tables so per-table hot sizes resolve.
  o.ralt.block_size = 512;
  o.Finalize();
  std::unique_ptr<DB> db;
  Status s = DB::Open(o, &db);
  if (!s.ok()) return s;

  constexpr size_t kValue = 200;
  const bench::ValueFactory values(7, kValue);
  const uint64_t record = 24 + kValue;
  const uint64_t hot_records = static_cast<uint64_t>((1.0 - p) * kFdLast / record);
  uint64_t next_id = 0;
  for (; next_id < hot_records; ++next_id) {
    const std::string key = bench::KeyName(next_id);
    s = db->Put(key, values.Make(next_id, 0));
    if (!s.ok()) return s;
    db->ralt()->LogAccess(key, kValue);
  }
  db->ralt()->Flush();
  // Writes pause every 256 KiB until compaction catches up, so the level
  // sits at its target as in a steady state.
  auto write_cold = [&](uint64_t bytes) -> Status {
    const uint64_t n = bytes / record;
    const uint64_t batch = (256 << 10) / record;
    for (uint64_t i = 0; i < n; ++i, ++next_id) {
      Status st = db->Put(bench::KeyName(next_id), values.Make(next_id, 0));
      if (!st.ok()) return st;
      if ((i + 1) % batch == 0) db->WaitForIdle();
    }
    return Status::OK();
  };
  s = write_cold(12 * kFdLast);
  if (s.ok()) s = db->Flush();
  db->WaitForIdle();
  const RunMetrics before = db->GetMetrics();
  if (s.ok()) s = write_cold(20 * kFdLast);
  if (s.ok()) s = db->Flush();
  db->WaitForIdle();
  const RunMetrics m = db->GetMetrics().Minus(before);
  Status c = db->Close();
  fs::remove_all(dir);
  if (!s.ok()) return s;
  if (!c.ok()) return c;
  const double written = static_cast<double>(m.inter_tier_bytes_to_sd + m.inter_tier_bytes_to_fd);
  const double moved = static_cast<double>(m.inter_tier_input_fd_bytes) - static_cast<double>(m.inter_tier_bytes_to_fd);
  out->p = p;
  out->measured = moved > 0 ? written / moved : 0;
  out->expected = 0.5 * kSizeRatio / p;
  ctx.Log("retention p=%.2f: inter-tier jobs=%llu fd_in=%.1f MiB to_sd=%.1f MiB to_fd=%.1f MiB wa=%.2f",
          p, static_cast<unsigned long long>(m.inter_tier_compactions),
          m.inter_tier_input_fd_bytes / 1048576.0, m.inter_tier_bytes_to_sd / 1048576.0,
          m.inter_tier_bytes_to_fd / 1048576.0, out->measured);
  return Status::OK();
}

CompactionCandidate Cand(uint64_t f, uint64_t o, uint64_t h, uint64_t order) {
  CompactionCandidate c;
  c.file_size = f;
  c.overlapping_bytes = o;
  c.hot_size = h;
  c.creation_order = order;
  c.inter_tier = true;
  return c;
}

}  // namespace

Outcome RetentionWriteAmp(Context& ctx) {
  // p is the cold fraction of the last FD level.
  std::vector<WaPoint> points;
  for (double p : {1.0, 0.5, 0.25}) {
    WaPoint w;
    Status s = MeasureRetentionWa(ctx, p, &w);
    if (!s.ok()) return {false, s.ToString()};
    points.push_back(w);
  }
  bool pass = true;
  std::string detail;
  for (size_t i = 0; i < points.size(); ++i) {
    const WaPoint& w = points[i];
    const bool in_band = w.measured >= w.expected / kWaFactor && w.measured <= w.expected * kWaFactor;
    const bool monotone = i == 0 || w.measured > points[i - 1].measured;
    pass = pass && in_band && monotone;
    detail += Fmt("%sp=%.2f wa=%.2f (T/2p=%.1f%s%s)", i ? "; " : "", w.p, w.measured, w.expected,
                  in_band ? "" : ", outside 2x", monotone ? "" : ", not increasing");
  }
  return {pass, detail};
}

Outcome CompactionPicker(Context& ctx) {
  std::vector<std::string> failures;
  // Zero benefit everywhere: the oldest table.
  {
    std::vector<CompactionCandidate> c{Cand(4, 8, 4, 7), Cand(4, 1, 9, 3), Cand(4, 0, 4, 5)};
    auto pick = PickCandidate(&c);
    if (!pick || *pick != 1) failures.push_back("zero-benefit fallback");
  }
  // Argmax.
  {
    std::vector<CompactionCandidate> c{Cand(10, 20, 1, 2), Cand(10, 80, 1, 1)};
    auto pick = PickCandidate(&c);
    if (!pick || *pick != 0) failures.push_back("argmax");
  }
  // Equal scores: older wins, whatever the input order.
  for (int rep = 0; rep < 2; ++rep) {
    std::vector<CompactionCandidate> c{Cand(10, 10, 0, rep ? 4 : 8), Cand(10, 10, 0, rep ? 8 : 4)};
    auto pick = PickCandidate(&c);
    if (!pick || c[*pick].creation_order != 4) failures.push_back("tie-break");
  }
  if (std::abs(ScoreCandidate(64, 128, 16, true) - 0.25) > 1e-12) failures.push_back("score arithmetic");

  // Adversarial all-hot last FD level.
  const fs::path dir = ctx.NewDir("liveness");
  DBOptions o = SmallStoreOptions(dir);
  o.layout.fd_last_level_target = 64 << 10;
  o.target_file_size = 24 << 10;
  o.memtable_size = 32 << 10;
  o.ralt.background = false;
  o.ralt.hot_set_size_limit = 1ull << 40;
  o.ralt.physical_size_limit = 1ull << 40;
  o.Finalize();
  std::unique_ptr<DB> db;
  Status s = DB::Open(o, &db);
  if (!s.ok()) return {false, s.ToString()};
  db->PauseBackgroundWork();
  for (int i = 0; i < 2000; ++i) {
    const std::string key = bench::KeyName(static_cast<uint64_t>(i));
    db->Put(key, std::string(100, 'v'));
    db->ralt()->LogAccess(key, 100);
  }
  db->ralt()->Flush();
  db->Flush();
  while (!db->GetSuperVersion()->imms.empty()) {
    db->ContinueBackgroundWork();
    db->PauseBackgroundWork();
  }
  for (int level = 0; level < o.layout.fd_last_level(); ++level) {
    while (db->CompactLevel(level).ok()) {
    }
  }
  const int fd_last = o.layout.fd_last_level();
  const uint64_t start_bytes = db->GetSuperVersion()->version->LevelBytes(fd_last);
  const RunMetrics before = db->GetMetrics();
  db->ContinueBackgroundWork();
  db->WaitForIdle();
  const RunMetrics m = db->GetMetrics().Minus(before);
  const uint64_t end_bytes = db->GetSuperVersion()->version->LevelBytes(fd_last);
  db->Close();
  fs::remove_all(dir);
  const bool live = start_bytes > o.layout.Target(fd_last) && end_bytes <= o.layout.Target(fd_last) &&
                    m.compactions < kMaxLivenessCompactions;
  if (!live) failures.push_back("all-hot liveness");
  std::string detail = Fmt("all-hot level %llu -> %llu bytes (target %llu) in %llu compactions, %llu bytes retained",
                           static_cast<unsigned long long>(start_bytes), static_cast<unsigned long long>(end_bytes),
                           static_cast<unsigned long long>(o.layout.Target(fd_last)),
                           static_cast<unsigned long long>(m.compactions),
                           static_cast<unsigned long long>(m.retained_bytes));
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

}  // namespace tierkv::acceptance
