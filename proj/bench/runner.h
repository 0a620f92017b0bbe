#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tierkv/db.h"
#include "tierkv/metrics.h"
#include "workload.h"

namespace tierkv::bench {

enum class Ablation {
  kNone,
  kNoRetain,
  kPromoteAccessed,
  kNoByCompaction,
  // No hotness tracking, promotion or retention: a plain tiered LSM-tree.
  kPlain,
};

Status ParseAblation(std::string_view s, Ablation* out);
const char* AblationName(Ablation a);
void ApplyAblation(Ablation a, DBOptions* o);

Status ParseScoring(std::string_view s, ScoringMethod* out);

struct BenchConfig {
  DBOptions db;
  int workers = 8;
  // Series windows close after window_seconds of wall time, or after
  // window_ops operations when that is non-zero.
  double window_seconds = 10.0;
  uint64_t window_ops = 0;
  // Every n-th get is timed.
  uint32_t latency_sample_every = 1;
  bool verbose = false;
};

// Desk-scale geometry: about 100 MiB of FD levels, hot-set limit at 60% of
// FD, 4 MiB tables. The tier paths are left empty.
BenchConfig DeskScaleConfig();

// key=value lines; '#' starts a comment. Sizes take K, M or G suffixes.
Status ParseConfig(std::string_view text, BenchConfig* config);
Status LoadConfigFile(const std::filesystem::path& path, BenchConfig* config);

struct RunOptions {
  Ablation ablation = Ablation::kNone;
  // Directory from PrepareTemplate; its tables are copied instead of
  // running the load phase.
  std::filesystem::path template_dir;
  // Called once per closed window with the window's metrics delta.
  std::function<void(size_t window, const RunMetrics& delta)> on_window;
};

// Loads spec's records into a fresh store under `dir` and leaves the
// closed store there for reuse by runs of the same spec. `load` receives
// the load phase's metrics when non-null.
Status PrepareTemplate(const BenchConfig& config, const WorkloadSpec& spec,
                       const std::filesystem::path& dir, RunMetrics* load = nullptr);

// Load phase (or template copy) then run phase. Tier directories in
// config.db must exist and be empty. Metrics cover the run phase; limits
// and sizes are end-of-run values.
Status RunWorkload(const BenchConfig& config, const WorkloadSpec& spec, const RunOptions& opts,
                   RunMetrics* out);

// First window whose hit rate reaches 95% of the series maximum.
size_t StableStart(const std::vector<double>& hit_rates);

// Percentile of samples in [0, 100]; samples are reordered.
double Percentile(std::vector<uint32_t>* samples, double pct);

}  // namespace tierkv::bench
