#include <algorithm>
#include <cmath>

#include "acceptance.h"

namespace tierkv::acceptance {

namespace {

using bench::Ablation;
using bench::Mix;
using bench::SkewKind;
using bench::WorkloadSpec;

constexpr uint64_t kLoadBytes = 1ull << 30;
constexpr size_t kRecordBytes = 1024;
constexpr uint64_t kWindowOps = 100000;
// Hit-rate convergence.
constexpr uint64_t kHitRateOps = 2000000;
constexpr double kMinStableHitRate = 0.90;
// Uniform overhead.
constexpr uint64_t kUniformOps = 1000000;
constexpr double kMaxPromotedShare = 0.10;
constexpr double kMaxCompactionRatio = 1.3;
// Auto-tuning.
constexpr uint64_t kAutotuneOps = 3000000;
constexpr double kUniformFloorFactor = 1.5;
constexpr double kHotSizeTolerance = 0.30;
// Scoring ordering.
constexpr uint64_t kScoringOps = 1000000;

const char* kTemplate = "1gib-1k";

WorkloadSpec Spec(Mix mix, SkewKind kind, double f, uint64_t ops) {
  WorkloadSpec s;
  s.mix = mix;
  s.skew.kind = kind;
  s.skew.hot_fraction = f;
  s.record_bytes = kRecordBytes;
  s.load_bytes = kLoadBytes;
  s.run_ops = ops;
  s.seed = 42;
  return s;
}

}  // namespace

bench::BenchConfig WorkloadConfig() {
  bench::BenchConfig c = bench::DeskScaleConfig();
  c.workers = 8;
  // Windows by op count keep the series independent of machine speed.
  c.window_ops = kWindowOps;
  c.latency_sample_every = 16;
  return c;
}

Outcome HitRateConvergence(Context& ctx) {
  const bench::BenchConfig config = WorkloadConfig();
  RunMetrics ro, rw, rw_no_retain;
  Status s = ctx.Run(kTemplate, config, Spec(Mix::kReadOnly, SkewKind::kHotspot, 0.05, kHitRateOps),
                     Ablation::kNone, &ro);
  if (s.ok()) {
    s = ctx.Run(kTemplate, config, Spec(Mix::kReadWrite, SkewKind::kHotspot, 0.05, kHitRateOps),
                Ablation::kNone, &rw);
  }
  if (s.ok()) {
    s = ctx.Run(kTemplate, config, Spec(Mix::kReadWrite, SkewKind::kHotspot, 0.05, kHitRateOps),
                Ablation::kNoRetain, &rw_no_retain);
  }
  if (!s.ok()) return {false, s.ToString()};
  const bool pass = ro.stable_hit_rate >= kMinStableHitRate && rw_no_retain.stable_hit_rate < rw.stable_hit_rate;
  return {pass, Fmt("RO hotspot-5%% stable hit rate %.4f (need >= %.2f, stable from window %llu); RW hotspot-5%% "
                    "stable hit rate %.4f vs no-retain %.4f (promoted %.1f vs %.1f MiB)",
                    ro.stable_hit_rate, kMinStableHitRate,
                    static_cast<unsigned long long>(ro.stable_start_window), rw.stable_hit_rate,
                    rw_no_retain.stable_hit_rate,
                    (rw.promoted_bytes_flush + rw.promoted_bytes_compaction) / 1048576.0,
                    (rw_no_retain.promoted_bytes_flush + rw_no_retain.promoted_bytes_compaction) / 1048576.0)};
}

Outcome UniformOverhead(Context& ctx) {
  const bench::BenchConfig config = WorkloadConfig();
  const WorkloadSpec spec = Spec(Mix::kReadOnly, SkewKind::kUniform, 0, kUniformOps);
  RunMetrics def, accessed, plain;
  Status s = ctx.Run(kTemplate, config, spec, Ablation::kNone, &def);
  if (s.ok()) s = ctx.Run(kTemplate, config, spec, Ablation::kPromoteAccessed, &accessed);
  if (s.ok()) s = ctx.Run(kTemplate, config, spec, Ablation::kPlain, &plain);
  if (!s.ok()) return {false, s.ToString()};
  const auto promoted = [](const RunMetrics& m) {
    return static_cast<double>(m.promoted_bytes_flush + m.promoted_bytes_compaction);
  };
  const double share = promoted(accessed) > 0 ? promoted(def) / promoted(accessed) : 1.0;
  // Totals cover the whole experiment: the shared load phase plus the run.
  const double load = static_cast<double>(ctx.LoadMetrics(kTemplate).compaction_bytes_written_total());
  const double def_total = load + static_cast<double>(def.compaction_bytes_written_total());
  const double plain_total = load + static_cast<double>(plain.compaction_bytes_written_total());
  const double ratio = def_total / plain_total;
  const bool pass = share <= kMaxPromotedShare && ratio <= kMaxCompactionRatio;
  return {pass, Fmt("promoted %.1f MiB vs %.1f MiB promote-accessed (%.1f%%, limit %.0f%%); compaction bytes "
                    "%.0f MiB vs %.0f MiB plain (%.3fx, limit %.1fx; load phase %.0f MiB)",
                    promoted(def) / 1048576.0, promoted(accessed) / 1048576.0, share * 100, kMaxPromotedShare * 100,
                    def_total / 1048576.0, plain_total / 1048576.0, ratio, kMaxCompactionRatio, load / 1048576.0)};
}

Outcome AutoTuning(Context& ctx) {
  bench::BenchConfig config = WorkloadConfig();
  config.db.ralt.autotune.enabled = true;
  config.db.Finalize();
  const double l_hs = static_cast<double>(config.db.ralt.autotune.l_hs);
  // RALT counts a record's hot size as key plus value bytes.
  const auto hot_bytes = [](double f) {
    return std::floor(f * static_cast<double>(kLoadBytes / kRecordBytes)) * static_cast<double>(kRecordBytes);
  };
  bool pass = true;
  std::string detail;
  auto check = [&](const char* name, const WorkloadSpec& spec, double lo, double hi, double ref) {
    RunMetrics m;
    Status s = ctx.Run(kTemplate, config, spec, Ablation::kNone, &m);
    if (!s.ok()) {
      pass = false;
      detail += std::string(detail.empty() ? "" : "; ") + name + ": " + s.ToString();
      return;
    }
    const double limit = static_cast<double>(m.ralt_hot_set_limit);
    const bool ok = limit >= lo && limit <= hi;
    pass = pass && ok;
    detail += Fmt("%s%s limit %.1f MiB (ref %.1f MiB%s)", detail.empty() ? "" : "; ", name, limit / 1048576.0,
                  ref / 1048576.0, ok ? "" : ", out of range");
  };
  check("uniform", Spec(Mix::kReadOnly, SkewKind::kUniform, 0, kAutotuneOps), 0, kUniformFloorFactor * l_hs,
        l_hs);
  for (double f : {0.01, 0.02, 0.05}) {
    const double h = hot_bytes(f);
    check(f == 0.01 ? "hotspot-1%" : f == 0.02 ? "hotspot-2%" : "hotspot-5%",
          Spec(Mix::kReadOnly, SkewKind::kHotspot, f, kAutotuneOps), (1 - kHotSizeTolerance) * h,
          (1 + kHotSizeTolerance) * h, h);
  }
  WorkloadSpec shift = Spec(Mix::kReadOnly, SkewKind::kShift, 0.05, kAutotuneOps);
  shift.skew.hot_fraction2 = 0.02;
  const double h2 = hot_bytes(0.02);
  check("shift 5%->2%", shift, (1 - kHotSizeTolerance) * h2, (1 + kHotSizeTolerance) * h2, h2);
  return {pass, detail};
}

Outcome ScoringOrdering(Context& ctx) {
  double rate[3] = {0, 0, 0};
  const ScoringMethod methods[3] = {ScoringMethod::kExpSmoothing, ScoringMethod::kClock, ScoringMethod::kLRU};
  for (int i = 0; i < 3; ++i) {
    bench::BenchConfig config = WorkloadConfig();
    config.db.ralt.scoring_method = methods[i];
    RunMetrics m;
    Status s = ctx.Run(kTemplate, config, Spec(Mix::kWriteHeavy, SkewKind::kHotspot, 0.05, kScoringOps),
                       Ablation::kNone, &m);
    if (!s.ok()) return {false, s.ToString()};
    rate[i] = m.stable_hit_rate;
  }
  const bool pass = rate[0] >= rate[1] && rate[1] >= rate[2];
  return {pass, Fmt("WH hotspot-5%% stable hit rates: exp %.4f, CLOCK %.4f, LRU %.4f", rate[0], rate[1], rate[2])};
}

}  // namespace tierkv::acceptance
