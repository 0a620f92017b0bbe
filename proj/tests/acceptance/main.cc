// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.

#include <unistd.h>

#include <chrono>
#include <cstdarg>
#include <functional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "acceptance.h"

namespace fs = std::filesystem;

namespace tierkv::acceptance {

std::string Fmt(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return buf;
}

void Context::Log(const char* fmt, ...) const {
  if (!verbose_) return;
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}

fs::path Context::NewDir(const std::string& name) {
  fs::path p = scratch_ / (name + "-" + std::to_string(next_dir_++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Status Context::Template(const std::string& name, const bench::BenchConfig& config,
                         const bench::WorkloadSpec& spec, fs::path* out) {
  auto it = templates_.find(name);
  if (it != templates_.end()) {
    *out = it->second;
    return Status::OK();
  }
  const fs::path dir = NewDir("template-" + name);
  const auto t0 = std::chrono::steady_clock::now();
  RunMetrics load;
  Status s = bench::PrepareTemplate(config, spec, dir, &load);
  if (!s.ok()) return s;
  load_metrics_[name] = load;
  Log("template %s loaded in %.1f s", name.c_str(),
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  templates_[name] = dir;
  *out = dir;
  return Status::OK();
}

RunMetrics Context::LoadMetrics(const std::string& name) const {
  auto it = load_metrics_.find(name);
  return it == load_metrics_.end() ? RunMetrics{} : it->second;
}

Status Context::Run(const std::string& template_name, bench::BenchConfig config,
                    const bench::WorkloadSpec& spec, bench::Ablation ablation, RunMetrics* out) {
  fs::path tmpl;
  Status s = Template(template_name, config, spec, &tmpl);
  if (!s.ok()) return s;
  const fs::path dir = NewDir("run");
  config.db.fd_path = dir / "fd";
  config.db.sd_path = dir / "sd";
  fs::create_directories(config.db.fd_path);
  fs::create_directories(config.db.sd_path);
  config.verbose = verbose_;
  bench::RunOptions opts;
  opts.ablation = ablation;
  opts.template_dir = tmpl;
  s = bench::RunWorkload(config, spec, opts, out);
  Log("run %s/%s/%s ablation=%s: stable_hit=%.4f hit=%.4f promoted=%.1f MiB compaction=%.1f MiB "
      "hot_limit=%.1f MiB %.1f s",
      template_name.c_str(), bench::MixName(spec.mix), bench::SkewName(spec.skew).c_str(),
      bench::AblationName(ablation), out->stable_hit_rate, out->fd_hit_rate(),
      (out->promoted_bytes_flush + out->promoted_bytes_compaction) / 1048576.0,
      out->compaction_bytes_written_total() / 1048576.0, out->ralt_hot_set_limit / 1048576.0,
      out->duration_seconds);
  fs::remove_all(dir);
  return s;
}

}  // namespace tierkv::acceptance

int main(int argc, char** argv) {
  using namespace tierkv::acceptance;
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string scratch;
  bool verbose = false;
  app.add_option("--only", only, "criterion numbers to run (default: all)")->delimiter(',');
  app.add_option("--scratch", scratch, "scratch directory (default: a fresh temp dir)");
  app.add_flag("--verbose", verbose, "log run details to stderr");
  CLI11_PARSE(app, argc, argv);

  bool own_scratch = false;
  if (scratch.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "tierkv-acceptance-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) return 2;
    scratch = tmpl;
    own_scratch = true;
  }
  Context ctx(scratch, verbose);

  const std::vector<std::pair<const char*, std::function<Outcome(Context&)>>> criteria = {
      {"correctness oracle", CorrectnessOracle},
      {"hit-rate convergence", HitRateConvergence},
      {"uniform-workload overhead", UniformOverhead},
      {"threshold estimator", ThresholdEstimator},
      {"scoring merge", ScoringMerge},
      {"hotness bloom check", HotnessBloom},
      {"range hot-size overestimation", RangeHotSizeOverestimate},
      {"retention write amplification", RetentionWriteAmp},
      {"compaction picker", CompactionPicker},
      {"auto-tuning", AutoTuning},
      {"scoring-method ordering", ScoringOrdering},
      {"promotion-cache safety", PromotionCacheSafety},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && selected.count(n) == 0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-30s %s  (%.0f s) %s\n", n, criteria[i].first, o.pass ? "PASS" : "FAIL",
                secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failed);
  if (own_scratch) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
  }
  return failed == 0 ? 0 : 1;
}
