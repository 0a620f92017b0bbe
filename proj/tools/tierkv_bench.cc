// tierkv-bench: loads a two-tier store and runs a YCSB-style workload.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "runner.h"

namespace fs = std::filesystem;
using namespace tierkv;
using namespace tierkv::bench;

namespace {

int Fail(const Status& s) {
  std::fprintf(stderr, "tierkv-bench: %s\n", s.ToString().c_str());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier LSM-tree benchmark driver"};
  std::string config_path, workload = "ro", skew = "hotspot:0.05", ablation = "none";
  std::string scoring = "exp", autotune = "off", report;
  uint64_t record_bytes = 1024, load_bytes = 1ull << 30, ops = 1000000, seed = 1;
  int workers = 0;
  double window = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--workload", workload, "ro | rw | wh | uh")->check(CLI::IsMember({"ro", "rw", "wh", "uh"}));
  app.add_option("--skew", skew, "uniform | hotspot:F | zipfian | shift:F1,F2");
  app.add_option("--record-bytes", record_bytes, "key plus value bytes")->transform(CLI::AsSizeValue(false));
  app.add_option("--load-bytes", load_bytes, "bytes loaded before the run phase")->transform(CLI::AsSizeValue(false));
  app.add_option("--ops", ops, "run-phase operations");
  app.add_option("--seed", seed, "workload seed");
  app.add_option("--ablation", ablation, "none | no-retain | promote-accessed | no-by-compaction | plain");
  app.add_option("--scoring", scoring, "exp | lru | clock")->check(CLI::IsMember({"exp", "lru", "clock"}));
  app.add_option("--autotune", autotune, "on | off")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--report", report, "write the key=value report here");
  app.add_option("--workers", workers, "client threads (overrides config)");
  app.add_option("--window-seconds", window, "series window length (overrides config)");
  app.add_flag("--verbose", verbose, "print each window");
  CLI11_PARSE(app, argc, argv);

  BenchConfig config = DeskScaleConfig();
  if (!config_path.empty()) {
    Status s = LoadConfigFile(config_path, &config);
    if (!s.ok()) return Fail(s);
  }
  if (workers > 0) config.workers = workers;
  if (window > 0) config.window_seconds = window;
  config.verbose = verbose;

  WorkloadSpec spec;
  spec.record_bytes = record_bytes;
  spec.load_bytes = load_bytes;
  spec.run_ops = ops;
  spec.seed = seed;
  Status s = ParseMix(workload, &spec.mix);
  if (s.ok()) s = ParseSkew(skew, &spec.skew);
  RunOptions run;
  if (s.ok()) s = ParseAblation(ablation, &run.ablation);
  if (s.ok()) s = ParseScoring(scoring, &config.db.ralt.scoring_method);
  if (!s.ok()) return Fail(s);
  config.db.ralt.autotune.enabled = autotune == "on";
  config.db.Finalize();

  // Without configured tier roots, run in a scratch directory.
  fs::path scratch;
  if (config.db.fd_path.empty() || config.db.sd_path.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "tierkv-bench-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) return Fail(Status::IOError("mkdtemp failed"));
    scratch = tmpl;
    config.db.fd_path = scratch / "fd";
    config.db.sd_path = scratch / "sd";
  }
  std::error_code ec;
  fs::create_directories(config.db.fd_path, ec);
  fs::create_directories(config.db.sd_path, ec);
  if (!fs::is_empty(config.db.fd_path, ec) || !fs::is_empty(config.db.sd_path, ec)) {
    return Fail(Status::InvalidArgument("tier directories must be empty"));
  }

  std::printf("workload=%s skew=%s records=%llu ops=%llu ablation=%s scoring=%s autotune=%s\n",
              MixName(spec.mix), SkewName(spec.skew).c_str(),
              static_cast<unsigned long long>(spec.load_records()),
              static_cast<unsigned long long>(spec.run_ops), AblationName(run.ablation),
              scoring.c_str(), autotune.c_str());
  RunMetrics m;
  s = RunWorkload(config, spec, run, &m);
  if (!scratch.empty()) fs::remove_all(scratch, ec);
  if (!s.ok()) return Fail(s);

  std::cout << FormatSummary(m);
  if (!report.empty()) {
    s = WriteReport(report, m);
    if (!s.ok()) return Fail(s);
  }
  return 0;
}
