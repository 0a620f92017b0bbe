#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oracle.h"
#include "runner.h"

namespace tierkv::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Shared scratch space and cached load-phase templates.
class Context {
 public:
  Context(std::filesystem::path scratch, bool verbose) : scratch_(std::move(scratch)), verbose_(verbose) {}

  bool verbose() const { return verbose_; }
  // Fresh empty directory under the scratch root.
  std::filesystem::path NewDir(const std::string& name);
  // Directory holding a loaded template for (config geometry, spec); built
  // on first use.
  Status Template(const std::string& name, const bench::BenchConfig& config,
                  const bench::WorkloadSpec& spec, std::filesystem::path* out);
  // Load-phase metrics of a template built by this context.
  RunMetrics LoadMetrics(const std::string& name) const;
  // Runs spec on a copy of the named template with fresh tier directories.
  Status Run(const std::string& template_name, bench::BenchConfig config,
             const bench::WorkloadSpec& spec, bench::Ablation ablation, RunMetrics* out);

  void Log(const char* fmt, ...) const __attribute__((format(printf, 2, 3)));

  // Concurrent stress results, shared between the oracle and safety
  // criteria.
  std::vector<bench::StressResult> stress_results;

 private:
  std::filesystem::path scratch_;
  bool verbose_;
  int next_dir_ = 0;
  std::map<std::string, std::filesystem::path> templates_;
  std::map<std::string, RunMetrics> load_metrics_;
};

Outcome CorrectnessOracle(Context& ctx);        // 1
Outcome HitRateConvergence(Context& ctx);       // 2
Outcome UniformOverhead(Context& ctx);          // 3
Outcome ThresholdEstimator(Context& ctx);       // 4
Outcome ScoringMerge(Context& ctx);             // 5
Outcome HotnessBloom(Context& ctx);             // 6
Outcome RangeHotSizeOverestimate(Context& ctx); // 7
Outcome RetentionWriteAmp(Context& ctx);        // 8
Outcome CompactionPicker(Context& ctx);         // 9
Outcome AutoTuning(Context& ctx);               // 10
Outcome ScoringOrdering(Context& ctx);          // 11
Outcome PromotionCacheSafety(Context& ctx);     // 12

// Desk-scale geometry used by the workload criteria.
bench::BenchConfig WorkloadConfig();
// Small geometry for the correctness and safety criteria.
DBOptions SmallStoreOptions(const std::filesystem::path& dir);

std::string Fmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace tierkv::acceptance
