#include "tierkv/metrics.h"

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "db_test_util.h"

namespace tierkv {
namespace {

std::map<std::string, std::string> ParseReport(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos || line.find(' ') != std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

TEST(MetricsTest, ZeroRunHasZeroRates) {
  RunMetrics m;
  EXPECT_EQ(m.fd_hit_rate(), 0.0);
  EXPECT_EQ(m.write_amplification(), 0.0);
  EXPECT_EQ(m.inter_tier_write_amplification(), 0.0);
}

TEST(MetricsTest, DerivedRates) {
  RunMetrics m;
  m.gets = 10;
  m.get_memtable = 2;
  m.get_promotion_cache = 1;
  m.get_fd_levels = 4;
  m.get_sd_levels = 3;
  EXPECT_DOUBLE_EQ(m.fd_hit_rate(), 0.7);
  m.user_bytes_written = 100;
  m.compaction_bytes_written = {150, 250};
  EXPECT_DOUBLE_EQ(m.write_amplification(), 4.0);
  m.inter_tier_input_fd_bytes = 50;
  m.inter_tier_bytes_to_sd = 200;
  m.inter_tier_bytes_to_fd = 25;
  EXPECT_DOUBLE_EQ(m.inter_tier_write_amplification(), 4.5);
}

TEST(MetricsTest, MinusSubtractsCounters) {
  RunMetrics a, b;
  a.gets = 10;
  b.gets = 4;
  a.compaction_bytes_written = {7, 9};
  b.compaction_bytes_written = {2, 10};
  a.hit_rate_series = {0.5};
  RunMetrics d = a.Minus(b);
  EXPECT_EQ(d.gets, 6u);
  EXPECT_EQ(d.compaction_bytes_written[0], 5u);
  EXPECT_EQ(d.compaction_bytes_written[1], 0u);
  EXPECT_EQ(d.hit_rate_series.size(), 1u);
}

TEST(MetricsTest, ReportHasStableKeys) {
  RunMetrics m;
  m.gets = 3;
  m.get_fd_levels = 3;
  m.ops_per_sec = {100, 200};
  m.hit_rate_series = {0.5, 1.0};
  auto kv = ParseReport(FormatReport(m));
  EXPECT_EQ(kv["gets"], "3");
  EXPECT_EQ(kv["fd_hit_rate"], "1");
  for (const char* k : {"promoted_bytes_flush", "promoted_bytes_compaction", "retained_bytes",
                        "compaction_bytes_written_fd", "compaction_bytes_written_sd",
                        "ralt_bytes_io", "cache_insert_aborts", "duration_seconds",
                        "write_amplification", "stable_hit_rate"}) {
    EXPECT_EQ(kv.count(k), 1u) << k;
  }
  EXPECT_NE(FormatReport(m).find("window=1 ops_per_sec=200 fd_hit_rate=1"), std::string::npos);
}

TEST(MetricsTest, WriteReportToFileAndUnwritablePath) {
  testing::TempDir dir;
  RunMetrics m;
  m.puts = 42;
  const auto path = dir.path() / "report.txt";
  ASSERT_TRUE(WriteReport(path, m).ok());
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(ParseReport(buf.str())["puts"], "42");
  EXPECT_NE(buf.str().find("---- summary ----"), std::string::npos);
  EXPECT_TRUE(WriteReport(dir.path() / "no" / "such" / "dir" / "r.txt", m).IsIOError());
}

TEST(MetricsTest, WriteAmplificationMatchesTierIo) {
  testing::TempDir dir;
  auto db = testing::OpenDb(testing::SmallOptions(dir));
  std::string value(200, 'v');
  for (int i = 0; i < 4000; ++i) ASSERT_TRUE(db->Put(testing::DbKey(i % 1500), value).ok());
  ASSERT_TRUE(db->Flush().ok());
  db->WaitForIdle();
  RunMetrics m = db->GetMetrics();
  ASSERT_GT(m.compactions, 0u);
  // Tier writes are flush output plus compaction output.
  EXPECT_EQ(m.tier_io[0].bytes_written + m.tier_io[1].bytes_written,
            m.flush_bytes_written + m.compaction_bytes_written_total());
  EXPECT_GT(m.write_amplification(), 0.0);
}

TEST(MetricsTest, MemtableHitsGiveFullHitRate) {
  testing::TempDir dir;
  auto db = testing::OpenDb(testing::SmallOptions(dir));
  ASSERT_TRUE(db->Put("k", "v").ok());
  std::string v;
  for (int i = 0; i < 100; ++i) ASSERT_TRUE(db->Get("k", &v).ok());
  RunMetrics m = db->GetMetrics();
  EXPECT_EQ(m.gets, 100u);
  EXPECT_EQ(m.get_memtable, 100u);
  EXPECT_DOUBLE_EQ(m.fd_hit_rate(), 1.0);
}

}  // namespace
}  // namespace tierkv
