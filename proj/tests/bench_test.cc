#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "runner.h"
#include "workload.h"

namespace tierkv::bench {
namespace {

TEST(ZipfianTest, PmfRatioOfFirstRanks) {
  ZipfianGenerator z(100000, 0.99);
  EXPECT_NEAR(z.Probability(1) / z.Probability(2), std::pow(2.0, 0.99), 1e-12);
  double sum = 0;
  for (uint64_t k = 1; k <= 100000; ++k) sum += z.Probability(k);
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(ZipfianTest, EmpiricalRatioOfFirstRanks) {
  ZipfianGenerator z(1000, 0.99);
  Rng rng(11);
  uint64_t c1 = 0, c2 = 0;
  for (int i = 0; i < 1000000; ++i) {
    const uint64_t r = z.Next(&rng);
    ASSERT_GE(r, 1u);
    ASSERT_LE(r, 1000u);
    c1 += r == 1;
    c2 += r == 2;
  }
  // About four standard errors.
  EXPECT_NEAR(static_cast<double>(c1) / c2, std::pow(2.0, 0.99), 0.04);
  EXPECT_NEAR(c1 / 1e6, z.Probability(1), 0.002);
}

TEST(ZipfianTest, GrowKeepsRanksInRange) {
  ZipfianGenerator z(10, 0.99);
  Rng rng(3);
  z.Grow(20);
  bool saw_new = false;
  for (int i = 0; i < 100000; ++i) {
    const uint64_t r = z.Next(&rng);
    ASSERT_LE(r, 20u);
    saw_new = saw_new || r > 10;
  }
  EXPECT_TRUE(saw_new);
}

TEST(KeyChooserTest, HotspotHitsHotRangeAtConfiguredRate) {
  Skew s;
  s.kind = SkewKind::kHotspot;
  s.hot_fraction = 0.05;
  const uint64_t n = 1000000;
  KeyChooser c(s, n, 1000000);
  Rng rng(5);
  uint64_t hot = 0;
  for (uint64_t i = 0; i < 1000000; ++i) {
    const uint64_t id = c.Next(&rng, i, n);
    ASSERT_LT(id, n);
    hot += c.IsHot(id, i) ? 1 : 0;
  }
  EXPECT_NEAR(hot / 1e6, 0.95, 0.003);
  EXPECT_EQ(c.FinalHotRecords(), 50000u);
}

TEST(KeyChooserTest, UniformPassesChiSquare) {
  Skew s;
  s.kind = SkewKind::kUniform;
  const uint64_t n = 100000;
  KeyChooser c(s, n, 1000000);
  Rng rng(9);
  std::vector<double> buckets(100, 0);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) buckets[c.Next(&rng, i, n) * 100 / n] += 1;
  double chi2 = 0;
  const double expected = draws / 100.0;
  for (double b : buckets) chi2 += (b - expected) * (b - expected) / expected;
  // Upper 1% point of chi-square with 99 degrees of freedom.
  EXPECT_LT(chi2, 134.64);
}

TEST(KeyChooserTest, ShiftMovesHotRange) {
  Skew s;
  s.kind = SkewKind::kShift;
  s.hot_fraction = 0.05;
  s.hot_fraction2 = 0.02;
  const uint64_t n = 100000;
  const uint64_t ops = 236000;
  KeyChooser c(s, n, ops);
  EXPECT_TRUE(c.IsHot(0, 0));
  EXPECT_FALSE(c.IsHot(n / 2, 0));
  EXPECT_TRUE(c.IsHot(n / 2, ops - 1));
  EXPECT_FALSE(c.IsHot(0, ops - 1));
  EXPECT_EQ(c.FinalHotRecords(), 2000u);
}

TEST(WorkloadGeneratorTest, SameSeedSameStream) {
  WorkloadSpec spec;
  spec.mix = Mix::kReadWrite;
  spec.skew.kind = SkewKind::kZipfian;
  spec.load_bytes = 10 << 20;
  spec.seed = 77;
  WorkloadGenerator a(spec), b(spec);
  uint64_t inserts = 0;
  for (int i = 0; i < 100000; ++i) {
    const Op x = a.NextRunOp();
    const Op y = b.NextRunOp();
    ASSERT_EQ(x.type, y.type);
    ASSERT_EQ(x.id, y.id);
    inserts += x.type == OpType::kInsert;
  }
  EXPECT_NEAR(inserts / 1e5, 0.25, 0.01);
  WorkloadSpec other = spec;
  other.seed = 78;
  WorkloadGenerator c(other), d(spec);
  int same = 0;
  for (int i = 0; i < 1000; ++i) same += c.NextRunOp().id == d.NextRunOp().id;
  EXPECT_LT(same, 500);
}

TEST(WorkloadGeneratorTest, ReadOnlyHasNoWrites) {
  WorkloadSpec spec;
  spec.load_bytes = 1 << 20;
  WorkloadGenerator g(spec);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(g.NextRunOp().type, OpType::kRead);
}

TEST(KeyNameTest, FixedWidthAndDistinct) {
  std::set<std::string> seen;
  for (uint64_t i = 0; i < 10000; ++i) {
    const std::string k = KeyName(i);
    ASSERT_EQ(k.size(), 24u);
    ASSERT_EQ(k.substr(0, 4), "user");
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(ValueFactoryTest, StampAndIdRoundTrip) {
  ValueFactory f(1, 1000);
  const std::string v = f.Make(12345, 678);
  EXPECT_EQ(v.size(), 1000u);
  EXPECT_EQ(ValueFactory::ValueStamp(v), 678u);
  EXPECT_EQ(ValueFactory::ValueId(v), 12345u);
}

TEST(ParseTest, SkewAndMix) {
  Skew s;
  ASSERT_TRUE(ParseSkew("hotspot:5%", &s).ok());
  EXPECT_EQ(s.kind, SkewKind::kHotspot);
  EXPECT_DOUBLE_EQ(s.hot_fraction, 0.05);
  ASSERT_TRUE(ParseSkew("shift:0.05,0.02", &s).ok());
  EXPECT_EQ(s.kind, SkewKind::kShift);
  EXPECT_DOUBLE_EQ(s.hot_fraction2, 0.02);
  EXPECT_FALSE(ParseSkew("hotspot:150%", &s).ok());
  EXPECT_FALSE(ParseSkew("pareto", &s).ok());
  Mix m;
  ASSERT_TRUE(ParseMix("wh", &m).ok());
  EXPECT_EQ(m, Mix::kWriteHeavy);
  EXPECT_FALSE(ParseMix("xx", &m).ok());
}

TEST(ParseTest, ConfigLines) {
  BenchConfig c = DeskScaleConfig();
  ASSERT_TRUE(ParseConfig("# comment\nworkers = 4\nmemtable_size=8M\nwindow_ops=5000\n", &c).ok());
  EXPECT_EQ(c.workers, 4);
  EXPECT_EQ(c.db.memtable_size, 8u << 20);
  EXPECT_EQ(c.window_ops, 5000u);
  EXPECT_FALSE(ParseConfig("no_such_key=1\n", &c).ok());
  EXPECT_FALSE(ParseConfig("workers\n", &c).ok());
}

TEST(SeriesTest, StableStartAndPercentile) {
  EXPECT_EQ(StableStart({0.1, 0.5, 0.92, 0.96, 0.95}), 2u);
  EXPECT_EQ(StableStart({0.1, 0.5, 0.91, 0.96, 0.95}), 3u);
  EXPECT_EQ(StableStart({}), 0u);
  std::vector<uint32_t> v;
  for (uint32_t i = 1; i <= 100; ++i) v.push_back(101 - i);
  EXPECT_EQ(Percentile(&v, 50), 50.0);
  EXPECT_EQ(Percentile(&v, 100), 100.0);
}

}  // namespace
}  // namespace tierkv::bench
