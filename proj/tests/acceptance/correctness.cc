#include <cstdio>

#include "acceptance.h"

namespace fs = std::filesystem;

namespace tierkv::acceptance {

namespace {

constexpr int kOracleRuns = 10;
constexpr uint64_t kOracleOps = 100000;
constexpr int kStressRuns = 3;
constexpr int kStressWorkers = 8;
constexpr uint64_t kStressOps = 1000000;
constexpr double kMaxAbortRate = 0.05;

std::string Key(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "user%08d", i);
  return buf;
}

Status RunStress(Context& ctx, uint64_t seed, bench::StressResult* out) {
  const fs::path dir = ctx.NewDir("stress");
  bench::StressSpec spec;
  spec.workers = kStressWorkers;
  spec.ops = kStressOps;
  spec.seed = seed;
  Status s = bench::StressRun(SmallStoreOptions(dir), spec, out);
  fs::remove_all(dir);
  ctx.Log("stress seed %llu: %llu ops in %.1f s, %llu violations, abort rate %.4f (%llu of %llu)",
          static_cast<unsigned long long>(seed), static_cast<unsigned long long>(out->ops), out->seconds,
          static_cast<unsigned long long>(out->violations), out->abort_rate(),
          static_cast<unsigned long long>(out->cache_insert_aborts),
          static_cast<unsigned long long>(out->cache_inserts + out->cache_insert_aborts));
  if (s.ok()) ctx.stress_results.push_back(*out);
  return s;
}

}  // namespace

DBOptions SmallStoreOptions(const fs::path& dir) {
  DBOptions o;
  o.fd_path = dir / "fd";
  o.sd_path = dir / "sd";
  fs::create_directories(o.fd_path);
  fs::create_directories(o.sd_path);
  o.memtable_size = 64 << 10;
  o.target_file_size = 64 << 10;
  o.layout.fd_levels = 2;
  o.layout.sd_levels = 2;
  o.layout.size_ratio = 4;
  o.layout.fd_last_level_target = 512 << 10;
  o.promotion_cache_seal_bytes = 32 << 10;
  o.ralt.unsorted_buffer_capacity = 32 << 10;
  o.ralt.table_target_size = 32 << 10;
  o.ralt.block_size = 4 << 10;
  o.ralt.hot_set_size_limit = 256 << 10;
  o.ralt.physical_size_limit = 128 << 10;
  o.Finalize();
  return o;
}

Outcome CorrectnessOracle(Context& ctx) {
  int diverged = 0;
  std::string first;
  for (int run = 0; run < kOracleRuns; ++run) {
    const fs::path dir = ctx.NewDir("oracle");
    bench::OracleSpec spec;
    spec.ops = kOracleOps;
    spec.seed = 1000 + static_cast<uint64_t>(run);
    bench::OracleResult r;
    Status s = bench::OracleRun(SmallStoreOptions(dir), spec, &r);
    fs::remove_all(dir);
    if (!s.ok()) return {false, "oracle run failed: " + s.ToString()};
    if (r.diverged || r.ops != kOracleOps) {
      ++diverged;
      if (first.empty()) first = r.message;
    }
  }
  uint64_t violations = 0, ops = 0;
  double secs = 0;
  for (int run = 0; run < kStressRuns; ++run) {
    bench::StressResult r;
    Status s = RunStress(ctx, 77 + static_cast<uint64_t>(run), &r);
    if (!s.ok()) return {false, "stress run failed: " + s.ToString()};
    violations += r.violations;
    ops += r.ops;
    secs += r.seconds;
    if (first.empty() && r.violations > 0) first = r.first_violation;
  }
  const bool pass = diverged == 0 && violations == 0 && ops >= kStressRuns * kStressOps;
  std::string detail = Fmt("oracle: %d of %d runs diverged; stress: %llu ops, %llu stale reads, %.0f s", diverged,
                           kOracleRuns, static_cast<unsigned long long>(ops),
                           static_cast<unsigned long long>(violations), secs);
  if (!first.empty()) detail += "; first: " + first;
  return {pass, detail};
}

Outcome PromotionCacheSafety(Context& ctx) {
  // Scripted interleaving: the SD source table is compacted away and the
  // key overwritten between the read and the cache insert.
  const fs::path dir = ctx.NewDir("safety");
  DBOptions o = SmallStoreOptions(dir);
  o.disable_auto_compactions = true;
  o.promote_accessed = true;
  std::unique_ptr<DB> db;
  Status s = DB::Open(o, &db);
  if (!s.ok()) return {false, s.ToString()};
  auto sink = [&] {
    db->Flush();
    for (int level = 0; level <= o.layout.fd_last_level(); ++level) {
      while (db->CompactLevel(level).ok()) {
      }
    }
  };
  for (int i = 0; i < 100; ++i) db->Put(Key(i), "old" + std::to_string(i));
  sink();
  const std::string key = Key(42);
  bool fired = false;
  db->SetSdReadHook([&](std::string_view k) {
    if (fired || k != key) return;
    fired = true;
    db->Put(key, "new");
    sink();
  });
  std::string first_read, second_read;
  s = db->Get(key, &first_read);
  db->SetSdReadHook(nullptr);
  const RunMetrics m = db->GetMetrics();
  std::string cached;
  uint64_t seq = 0;
  const bool in_cache = db->promotion_cache()->Get(key, &cached, &seq);
  Status s2 = db->Get(key, &second_read);
  db->Close();
  fs::remove_all(dir);
  const bool scripted = s.ok() && fired && first_read == "old42" && m.cache_insert_aborts == 1 &&
                        !in_cache && s2.ok() && second_read == "new";

  if (ctx.stress_results.empty()) {
    bench::StressResult r;
    Status st = RunStress(ctx, 77, &r);
    if (!st.ok()) return {false, "stress run failed: " + st.ToString()};
  }
  double worst = 0;
  for (const auto& r : ctx.stress_results) worst = std::max(worst, r.abort_rate());
  const bool rate_ok = worst < kMaxAbortRate;
  return {scripted && rate_ok,
          Fmt("scripted interleaving %s (aborts=%llu, later read=%s); worst stress abort rate %.4f (limit %.2f)",
              scripted ? "aborted as required" : "NOT handled",
              static_cast<unsigned long long>(m.cache_insert_aborts), second_read.c_str(), worst,
              kMaxAbortRate)};
}

}  // namespace tierkv::acceptance
