#include "tierkv/metrics.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tierkv {

uint64_t RunMetrics::fd_hits() const {
  return get_memtable + get_promotion_cache + get_fd_levels;
}

double RunMetrics::fd_hit_rate() const {
  if (gets == 0) return 0.0;
  return static_cast<double>(fd_hits()) / static_cast<double>(gets);
}

double RunMetrics::write_amplification() const {
  if (user_bytes_written == 0) return 0.0;
  return static_cast<double>(compaction_bytes_written_total()) /
         static_cast<double>(user_bytes_written);
}

double RunMetrics::inter_tier_write_amplification() const {
  if (inter_tier_input_fd_bytes == 0) return 0.0;
  return static_cast<double>(inter_tier_bytes_to_sd + inter_tier_bytes_to_fd) /
         static_cast<double>(inter_tier_input_fd_bytes);
}

namespace {

uint64_t Sub(uint64_t a, uint64_t b) { return a >= b ? a - b : 0; }

IoStats SubIo(const IoStats& a, const IoStats& b) {
  return IoStats{Sub(a.bytes_read, b.bytes_read), Sub(a.bytes_written, b.bytes_written),
                 Sub(a.read_ops, b.read_ops), Sub(a.write_ops, b.write_ops)};
}

}  // namespace

RunMetrics RunMetrics::Minus(const RunMetrics& b) const {
  RunMetrics m = *this;
  m.gets = Sub(gets, b.gets);
  m.get_memtable = Sub(get_memtable, b.get_memtable);
  m.get_promotion_cache = Sub(get_promotion_cache, b.get_promotion_cache);
  m.get_fd_levels = Sub(get_fd_levels, b.get_fd_levels);
  m.get_sd_levels = Sub(get_sd_levels, b.get_sd_levels);
  m.get_not_found = Sub(get_not_found, b.get_not_found);
  for (int i = 0; i < kMaxLevels; ++i) m.get_level[i] = Sub(get_level[i], b.get_level[i]);
  m.puts = Sub(puts, b.puts);
  m.deletes = Sub(deletes, b.deletes);
  m.user_bytes_written = Sub(user_bytes_written, b.user_bytes_written);
  m.promoted_bytes_flush = Sub(promoted_bytes_flush, b.promoted_bytes_flush);
  m.promoted_bytes_compaction = Sub(promoted_bytes_compaction, b.promoted_bytes_compaction);
  m.retained_bytes = Sub(retained_bytes, b.retained_bytes);
  m.cache_inserts = Sub(cache_inserts, b.cache_inserts);
  m.cache_insert_aborts = Sub(cache_insert_aborts, b.cache_insert_aborts);
  m.flush_bytes_written = Sub(flush_bytes_written, b.flush_bytes_written);
  m.flushes = Sub(flushes, b.flushes);
  m.compactions = Sub(compactions, b.compactions);
  for (int t = 0; t < 2; ++t) {
    m.compaction_bytes_written[t] = Sub(compaction_bytes_written[t], b.compaction_bytes_written[t]);
    m.compaction_bytes_read[t] = Sub(compaction_bytes_read[t], b.compaction_bytes_read[t]);
    m.tier_io[t] = SubIo(tier_io[t], b.tier_io[t]);
  }
  m.inter_tier_compactions = Sub(inter_tier_compactions, b.inter_tier_compactions);
  m.inter_tier_input_fd_bytes = Sub(inter_tier_input_fd_bytes, b.inter_tier_input_fd_bytes);
  m.inter_tier_bytes_to_sd = Sub(inter_tier_bytes_to_sd, b.inter_tier_bytes_to_sd);
  m.inter_tier_bytes_to_fd = Sub(inter_tier_bytes_to_fd, b.inter_tier_bytes_to_fd);
  m.ralt_bytes_io = Sub(ralt_bytes_io, b.ralt_bytes_io);
  return m;
}

std::string FormatReport(const RunMetrics& m) {
  std::ostringstream out;
  auto kv = [&](const char* k, auto v) { out << k << '=' << v << '\n'; };
  kv("gets", m.gets);
  kv("get_memtable", m.get_memtable);
  kv("get_promotion_cache", m.get_promotion_cache);
  kv("get_fd_levels", m.get_fd_levels);
  kv("get_sd_levels", m.get_sd_levels);
  kv("get_not_found", m.get_not_found);
  for (int i = 0; i < kMaxLevels; ++i) {
    if (m.get_level[i] != 0) out << "get_level_" << i << '=' << m.get_level[i] << '\n';
  }
  kv("puts", m.puts);
  kv("deletes", m.deletes);
  kv("user_bytes_written", m.user_bytes_written);
  kv("promoted_bytes_flush", m.promoted_bytes_flush);
  kv("promoted_bytes_compaction", m.promoted_bytes_compaction);
  kv("retained_bytes", m.retained_bytes);
  kv("cache_inserts", m.cache_inserts);
  kv("cache_insert_aborts", m.cache_insert_aborts);
  kv("flushes", m.flushes);
  kv("flush_bytes_written", m.flush_bytes_written);
  kv("compactions", m.compactions);
  kv("compaction_bytes_written_fd", m.compaction_bytes_written[0]);
  kv("compaction_bytes_written_sd", m.compaction_bytes_written[1]);
  kv("compaction_bytes_read_fd", m.compaction_bytes_read[0]);
  kv("compaction_bytes_read_sd", m.compaction_bytes_read[1]);
  kv("inter_tier_compactions", m.inter_tier_compactions);
  kv("inter_tier_input_fd_bytes", m.inter_tier_input_fd_bytes);
  kv("inter_tier_bytes_to_sd", m.inter_tier_bytes_to_sd);
  kv("inter_tier_bytes_to_fd", m.inter_tier_bytes_to_fd);
  for (int t = 0; t < 2; ++t) {
    const char* name = TierName(static_cast<TierId>(t));
    out << name << "_bytes_read=" << m.tier_io[t].bytes_read << '\n';
    out << name << "_bytes_written=" << m.tier_io[t].bytes_written << '\n';
    out << name << "_read_ops=" << m.tier_io[t].read_ops << '\n';
  }
  kv("ralt_bytes_io", m.ralt_bytes_io);
  kv("ralt_hot_set_limit", m.ralt_hot_set_limit);
  kv("ralt_physical_limit", m.ralt_physical_limit);
  kv("ralt_hot_size", m.ralt_hot_size);
  kv("ralt_physical_size", m.ralt_physical_size);
  kv("duration_seconds", m.duration_seconds);
  kv("window_seconds", m.window_seconds);
  for (size_t i = 0; i < m.ops_per_sec.size(); ++i) {
    out << "window=" << i << " ops_per_sec=" << m.ops_per_sec[i];
    if (i < m.hit_rate_series.size()) out << " fd_hit_rate=" << m.hit_rate_series[i];
    out << '\n';
  }
  kv("stable_start_window", m.stable_start_window);
  kv("stable_hit_rate", m.stable_hit_rate);
  kv("get_latency_p50_us", m.get_latency_p50_us);
  kv("get_latency_p99_us", m.get_latency_p99_us);
  kv("get_latency_p999_us", m.get_latency_p999_us);
  kv("fd_hit_rate", m.fd_hit_rate());
  kv("write_amplification", m.write_amplification());
  kv("inter_tier_write_amplification", m.inter_tier_write_amplification());
  return out.str();
}

std::string FormatSummary(const RunMetrics& m) {
  char buf[2048];
  const double mib = 1024.0 * 1024.0;
  std::snprintf(buf, sizeof(buf),
                "---- summary ----\n"
                "gets                 %llu\n"
                "fd hit rate          %.4f\n"
                "stable hit rate      %.4f\n"
                "promoted (flush)     %.2f MiB\n"
                "promoted (compact)   %.2f MiB\n"
                "retained             %.2f MiB\n"
                "compaction written   fd %.2f MiB, sd %.2f MiB\n"
                "write amplification  %.3f\n"
                "ralt io              %.2f MiB\n"
                "insert aborts        %llu of %llu\n"
                "duration             %.2f s\n",
                static_cast<unsigned long long>(m.gets), m.fd_hit_rate(), m.stable_hit_rate,
                m.promoted_bytes_flush / mib, m.promoted_bytes_compaction / mib,
                m.retained_bytes / mib, m.compaction_bytes_written[0] / mib,
                m.compaction_bytes_written[1] / mib, m.write_amplification(),
                m.ralt_bytes_io / mib, static_cast<unsigned long long>(m.cache_insert_aborts),
                static_cast<unsigned long long>(m.cache_inserts + m.cache_insert_aborts),
                m.duration_seconds);
  return buf;
}

Status WriteReport(const std::filesystem::path& path, const RunMetrics& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) return Status::IOError("cannot open report " + path.string());
  out << FormatReport(m) << FormatSummary(m);
  out.flush();
  if (!out) return Status::IOError("failed writing report " + path.string());
  return Status::OK();
}

}  // namespace tierkv
