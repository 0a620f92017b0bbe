#include "runner.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace tierkv::bench {

namespace fs = std::filesystem;

Status ParseAblation(std::string_view s, Ablation* out) {
  if (s == "none") *out = Ablation::kNone;
  else if (s == "no-retain") *out = Ablation::kNoRetain;
  else if (s == "promote-accessed") *out = Ablation::kPromoteAccessed;
  else if (s == "no-by-compaction") *out = Ablation::kNoByCompaction;
  else if (s == "plain") *out = Ablation::kPlain;
  else return Status::InvalidArgument("unknown ablation: " + std::string(s));
  return Status::OK();
}

const char* AblationName(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoRetain: return "no-retain";
    case Ablation::kPromoteAccessed: return "promote-accessed";
    case Ablation::kNoByCompaction: return "no-by-compaction";
    case Ablation::kPlain: return "plain";
  }
  return "?";
}

void ApplyAblation(Ablation a, DBOptions* o) {
  switch (a) {
    case Ablation::kNone: break;
    case Ablation::kNoRetain: o->enable_retention = false; break;
    case Ablation::kPromoteAccessed: o->promote_accessed = true; break;
    case Ablation::kNoByCompaction: o->enable_promotion_by_compaction = false; break;
    case Ablation::kPlain:
      o->enable_retention = false;
      o->enable_promotion_by_compaction = false;
      o->enable_promotion_by_flush = false;
      o->enable_ralt = false;
      break;
  }
}

Status ParseScoring(std::string_view s, ScoringMethod* out) {
  if (s == "exp") *out = ScoringMethod::kExpSmoothing;
  else if (s == "lru") *out = ScoringMethod::kLRU;
  else if (s == "clock") *out = ScoringMethod::kClock;
  else return Status::InvalidArgument("unknown scoring method: " + std::string(s));
  return Status::OK();
}

BenchConfig DeskScaleConfig() {
  BenchConfig c;
  DBOptions& o = c.db;
  o.layout.fd_levels = 2;
  o.layout.sd_levels = 2;
  o.layout.size_ratio = 10;
  o.layout.fd_last_level_target = 90ull << 20;
  o.memtable_size = 4 << 20;
  o.target_file_size = 4 << 20;
  o.promotion_cache_seal_bytes = 4 << 20;
  o.background_threads = 4;
  o.ralt.hot_set_size_limit = 60ull << 20;
  o.ralt.physical_size_limit = 8ull << 20;
  o.Finalize();
  return c;
}

namespace {

bool ParseU64(std::string_view s, uint64_t* out) {
  if (s.empty()) return false;
  uint64_t mult = 1;
  char last = s.back();
  if (last == 'K' || last == 'k') mult = 1ull << 10;
  else if (last == 'M' || last == 'm') mult = 1ull << 20;
  else if (last == 'G' || last == 'g') mult = 1ull << 30;
  if (mult != 1) s.remove_suffix(1);
  std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size() || v < 0) return false;
  *out = static_cast<uint64_t>(std::llround(v * static_cast<double>(mult)));
  return true;
}

bool ParseF64(std::string_view s, double* out) {
  std::string str(s);
  char* end = nullptr;
  *out = std::strtod(str.c_str(), &end);
  return !str.empty() && end == str.c_str() + str.size();
}

bool ParseBool(std::string_view s, bool* out) {
  if (s == "1" || s == "true" || s == "on" || s == "yes") *out = true;
  else if (s == "0" || s == "false" || s == "off" || s == "no") *out = false;
  else return false;
  return true;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Status ApplySetting(std::string_view key, std::string_view val, BenchConfig* c) {
  DBOptions& o = c->db;
  uint64_t u = 0;
  double d = 0;
  bool b = false;
  auto bad = [&] { return Status::InvalidArgument("bad value for " + std::string(key) + ": " + std::string(val)); };
  auto size = [&](auto* field) -> Status {
    if (!ParseU64(val, &u)) return bad();
    *field = static_cast<std::remove_pointer_t<decltype(field)>>(u);
    return Status::OK();
  };
  auto real = [&](double* field) -> Status {
    if (!ParseF64(val, &d)) return bad();
    *field = d;
    return Status::OK();
  };
  auto flag = [&](bool* field) -> Status {
    if (!ParseBool(val, &b)) return bad();
    *field = b;
    return Status::OK();
  };
  auto micros = [&](std::chrono::nanoseconds* field) -> Status {
    if (!ParseF64(val, &d) || d < 0) return bad();
    *field = std::chrono::nanoseconds(static_cast<int64_t>(d * 1000.0));
    return Status::OK();
  };

  if (key == "fd_path") { o.fd_path = std::string(val); return Status::OK(); }
  if (key == "sd_path") { o.sd_path = std::string(val); return Status::OK(); }
  // Per-block (16 KiB) latencies in microseconds.
  if (key == "fd_read_latency_us") return micros(&o.fd_profile.read_latency);
  if (key == "fd_write_latency_us") return micros(&o.fd_profile.write_latency);
  if (key == "sd_read_latency_us") return micros(&o.sd_profile.read_latency);
  if (key == "sd_write_latency_us") return micros(&o.sd_profile.write_latency);
  if (key == "fd_levels") return size(&o.layout.fd_levels);
  if (key == "sd_levels") return size(&o.layout.sd_levels);
  if (key == "fd_last_level_target") return size(&o.layout.fd_last_level_target);
  if (key == "sd_first_level_target") return size(&o.layout.sd_first_level_target);
  if (key == "size_ratio") return real(&o.layout.size_ratio);
  if (key == "memtable_size") return size(&o.memtable_size);
  if (key == "target_file_size") return size(&o.target_file_size);
  if (key == "max_immutable_memtables") return size(&o.max_immutable_memtables);
  if (key == "l0_compaction_trigger") return size(&o.l0_compaction_trigger);
  if (key == "l0_stop_writes_trigger") return size(&o.l0_stop_writes_trigger);
  if (key == "background_threads") return size(&o.background_threads);
  if (key == "promotion_cache_seal_bytes") return size(&o.promotion_cache_seal_bytes);
  if (key == "enable_retention") return flag(&o.enable_retention);
  if (key == "enable_promotion_by_compaction") return flag(&o.enable_promotion_by_compaction);
  if (key == "enable_promotion_by_flush") return flag(&o.enable_promotion_by_flush);
  if (key == "promote_accessed") return flag(&o.promote_accessed);
  if (key == "ralt.hot_set_size_limit") return size(&o.ralt.hot_set_size_limit);
  if (key == "ralt.physical_size_limit") return size(&o.ralt.physical_size_limit);
  if (key == "ralt.alpha") return real(&o.ralt.alpha);
  if (key == "ralt.evict_fraction") return real(&o.ralt.evict_fraction);
  if (key == "ralt.buffer_size") return size(&o.ralt.unsorted_buffer_capacity);
  if (key == "ralt.table_size") return size(&o.ralt.table_target_size);
  if (key == "ralt.block_size") return size(&o.ralt.block_size);
  if (key == "ralt.bloom_bits_per_key") return size(&o.ralt.bloom_bits_per_key);
  if (key == "ralt.sample_count") return size(&o.ralt.sample_count);
  if (key == "ralt.num_levels") return size(&o.ralt.num_levels);
  if (key == "ralt.scoring") return ParseScoring(val, &o.ralt.scoring_method);
  if (key == "autotune.enabled") return flag(&o.ralt.autotune.enabled);
  if (key == "autotune.l_hs") return size(&o.ralt.autotune.l_hs);
  if (key == "autotune.r_hs") return size(&o.ralt.autotune.r_hs);
  if (key == "autotune.delta_c") return size(&o.ralt.autotune.delta_c);
  if (key == "autotune.c_max") return size(&o.ralt.autotune.c_max);
  if (key == "autotune.decay_period") return size(&o.ralt.autotune.decay_period);
  if (key == "autotune.unstable_cap") return size(&o.ralt.autotune.unstable_cap);
  if (key == "workers") return size(&c->workers);
  if (key == "window_seconds") return real(&c->window_seconds);
  if (key == "window_ops") return size(&c->window_ops);
  if (key == "latency_sample_every") return size(&c->latency_sample_every);
  return Status::InvalidArgument("unknown config key: " + std::string(key));
}

}  // namespace

Status ParseConfig(std::string_view text, BenchConfig* config) {
  BenchConfig c = *config;
  size_t lineno = 0;
  while (!text.empty()) {
    const size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++lineno;
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      return Status::InvalidArgument("config line " + std::to_string(lineno) + ": missing '='");
    }
    Status s = ApplySetting(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)), &c);
    if (!s.ok()) return Status::InvalidArgument("config line " + std::to_string(lineno) + ": " + s.message());
  }
  c.db.Finalize();
  *config = std::move(c);
  return Status::OK();
}

Status LoadConfigFile(const fs::path& path, BenchConfig* config) {
  std::ifstream in(path);
  if (!in) return Status::IOError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), config);
}

size_t StableStart(const std::vector<double>& hit_rates) {
  if (hit_rates.empty()) return 0;
  const double max = *std::max_element(hit_rates.begin(), hit_rates.end());
  for (size_t i = 0; i < hit_rates.size(); ++i) {
    if (hit_rates[i] >= 0.95 * max) return i;
  }
  return 0;
}

double Percentile(std::vector<uint32_t>* samples, double pct) {
  if (samples->empty()) return 0.0;
  const size_t n = samples->size();
  size_t idx = static_cast<size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
  idx = std::min(n - 1, idx == 0 ? 0 : idx - 1);
  std::nth_element(samples->begin(), samples->begin() + static_cast<std::ptrdiff_t>(idx), samples->end());
  return (*samples)[idx];
}

namespace {

Status LoadRecords(DB* db, const WorkloadSpec& spec) {
  const ValueFactory values(spec.seed, spec.value_bytes());
  const uint64_t n = spec.load_records();
  for (uint64_t id = 0; id < n; ++id) {
    Status s = db->Put(KeyName(id, spec.key_bytes), values.Make(id, 0));
    if (!s.ok()) return s;
  }
  Status s = db->Flush();
  if (!s.ok()) return s;
  db->WaitForIdle();
  return Status::OK();
}

Status CopyDir(const fs::path& from, const fs::path& to) {
  std::error_code ec;
  fs::create_directories(to, ec);
  for (const auto& e : fs::directory_iterator(from, ec)) {
    fs::copy_file(e.path(), to / e.path().filename(), fs::copy_options::overwrite_existing, ec);
    if (ec) return Status::IOError("copy " + e.path().string() + ": " + ec.message());
  }
  if (ec) return Status::IOError("list " + from.string() + ": " + ec.message());
  return Status::OK();
}

}  // namespace

Status PrepareTemplate(const BenchConfig& config, const WorkloadSpec& spec, const fs::path& dir,
                       RunMetrics* load) {
  Status s = spec.Validate();
  if (!s.ok()) return s;
  DBOptions o = config.db;
  o.fd_path = dir / "fd";
  o.sd_path = dir / "sd";
  fs::create_directories(o.fd_path);
  fs::create_directories(o.sd_path);
  std::unique_ptr<DB> db;
  s = DB::Open(o, &db);
  if (!s.ok()) return s;
  s = LoadRecords(db.get(), spec);
  if (load != nullptr) *load = db->GetMetrics();
  Status c = db->Close();
  return s.ok() ? c : s;
}

Status RunWorkload(const BenchConfig& config, const WorkloadSpec& spec, const RunOptions& opts,
                   RunMetrics* out) {
  Status s = spec.Validate();
  if (!s.ok()) return s;
  if (config.workers < 1) return Status::InvalidArgument("workers must be >= 1");
  DBOptions o = config.db;
  ApplyAblation(opts.ablation, &o);
  if (!opts.template_dir.empty()) {
    s = CopyDir(opts.template_dir / "fd", o.fd_path);
    if (s.ok()) s = CopyDir(opts.template_dir / "sd", o.sd_path);
    if (!s.ok()) return s;
  }
  std::unique_ptr<DB> db;
  s = DB::Open(o, &db);
  if (!s.ok()) return s;
  if (opts.template_dir.empty()) {
    s = LoadRecords(db.get(), spec);
    if (!s.ok()) return s;
  }

  // The whole run stream is drawn up front; worker w executes ops w, w+W,...
  WorkloadGenerator gen(spec);
  std::vector<Op> ops(spec.run_ops);
  for (auto& op : ops) op = gen.NextRunOp();
  const ValueFactory values(spec.seed, spec.value_bytes());

  const RunMetrics base = db->GetMetrics();
  std::atomic<uint64_t> done{0};
  std::atomic<uint64_t> stamp{1};
  std::atomic<bool> failed{false};
  Status worker_error;
  std::mutex error_mu;
  std::vector<std::vector<uint32_t>> latencies(static_cast<size_t>(config.workers));
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::thread> threads;
  for (int w = 0; w < config.workers; ++w) {
    threads.emplace_back([&, w] {
      auto& lat = latencies[static_cast<size_t>(w)];
      std::string value;
      uint64_t reads = 0;
      for (size_t i = static_cast<size_t>(w); i < ops.size() && !failed.load(std::memory_order_relaxed);
           i += static_cast<size_t>(config.workers)) {
        const Op& op = ops[i];
        const std::string key = KeyName(op.id, spec.key_bytes);
        Status st;
        if (op.type == OpType::kRead) {
          const bool timed = config.latency_sample_every > 0 && reads++ % config.latency_sample_every == 0;
          const auto t0 = std::chrono::steady_clock::now();
          st = db->Get(key, &value);
          if (timed) {
            const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                                std::chrono::steady_clock::now() - t0).count();
            lat.push_back(static_cast<uint32_t>(std::min<int64_t>(ns, UINT32_MAX)));
          }
          if (st.IsNotFound()) st = Status::OK();
        } else {
          st = db->Put(key, values.Make(op.id, stamp.fetch_add(1, std::memory_order_relaxed)));
        }
        if (!st.ok()) {
          std::lock_guard l(error_mu);
          worker_error = st;
          failed = true;
        }
        done.fetch_add(1, std::memory_order_relaxed);
      }
    });
  }

  // Window monitor.
  std::vector<double> hit_rates, ops_per_sec;
  std::vector<uint64_t> win_gets, win_hits;
  RunMetrics prev = base;
  uint64_t prev_done = 0;
  auto win_start = start;
  auto close_window = [&](uint64_t now_done) {
    const auto now = std::chrono::steady_clock::now();
    RunMetrics cur = db->GetMetrics();
    RunMetrics delta = cur.Minus(prev);
    const double secs = std::chrono::duration<double>(now - win_start).count();
    ops_per_sec.push_back(secs > 0 ? static_cast<double>(now_done - prev_done) / secs : 0.0);
    hit_rates.push_back(delta.fd_hit_rate());
    win_gets.push_back(delta.gets);
    win_hits.push_back(delta.fd_hits());
    if (config.verbose) {
      std::fprintf(stderr, "window %zu: %.0f ops/s fd_hit_rate=%.4f ralt_hot_limit=%llu\n",
                   hit_rates.size() - 1, ops_per_sec.back(), hit_rates.back(),
                   static_cast<unsigned long long>(cur.ralt_hot_set_limit));
    }
    if (opts.on_window) opts.on_window(hit_rates.size() - 1, delta);
    prev = std::move(cur);
    prev_done = now_done;
    win_start = now;
  };
  while (true) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    const uint64_t d = done.load(std::memory_order_relaxed);
    if (d >= ops.size() || failed.load()) break;
    const bool by_ops = config.window_ops > 0;
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - win_start).count();
    if ((by_ops && d - prev_done >= config.window_ops) || (!by_ops && elapsed >= config.window_seconds)) {
      close_window(d);
    }
  }
  for (auto& t : threads) t.join();
  const uint64_t final_done = done.load();
  if (final_done > prev_done) close_window(final_done);
  const auto end = std::chrono::steady_clock::now();

  if (failed) {
    db->Close();
    return worker_error;
  }
  RunMetrics m = db->GetMetrics().Minus(base);
  m.duration_seconds = std::chrono::duration<double>(end - start).count();
  m.window_seconds = config.window_seconds;
  m.hit_rate_series = hit_rates;
  m.ops_per_sec = ops_per_sec;
  m.stable_start_window = StableStart(hit_rates);
  uint64_t sg = 0, sh = 0;
  for (size_t i = m.stable_start_window; i < win_gets.size(); ++i) {
    sg += win_gets[i];
    sh += win_hits[i];
  }
  m.stable_hit_rate = sg > 0 ? static_cast<double>(sh) / static_cast<double>(sg) : 0.0;
  std::vector<uint32_t> all;
  for (auto& v : latencies) all.insert(all.end(), v.begin(), v.end());
  m.get_latency_p50_us = Percentile(&all, 50) / 1000.0;
  m.get_latency_p99_us = Percentile(&all, 99) / 1000.0;
  m.get_latency_p999_us = Percentile(&all, 99.9) / 1000.0;
  s = db->Close();
  *out = std::move(m);
  return s;
}

}  // namespace tierkv::bench
