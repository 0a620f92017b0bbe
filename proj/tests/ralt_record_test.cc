#include "tierkv/ralt_record.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace tierkv {
namespace {

RaltRecord Rec(std::string key, uint64_t tick, double score, uint64_t value_len = 100) {
  RaltRecord r;
  r.key = std::move(key);
  r.tick = tick;
  r.score = score;
  r.value_len = value_len;
  return r;
}

TEST(RaltRecordTest, SizesOfWorkedExample) {
  RaltRecord r = Rec("user12345", 0, 1.0, 200);
  EXPECT_EQ(r.HotSize(), 209u);
  EXPECT_EQ(r.PhysicalSize(), 37u);
  EXPECT_EQ(r.Encode().size(), 37u);
}

TEST(RaltRecordTest, PayloadRoundTrip) {
  RaltRecord r = Rec("k", 77, 3.25, 1000);
  r.counter = 9;
  r.tag = true;
  r.epoch = 12345;
  RaltRecord d = RaltRecord::DecodePayload(r.key, r.EncodePayload());
  EXPECT_EQ(d.value_len, 1000u);
  EXPECT_EQ(d.tick, 77u);
  EXPECT_EQ(d.score, 3.25);
  EXPECT_EQ(d.counter, 9u);
  EXPECT_TRUE(d.tag);
  EXPECT_EQ(d.epoch, 12345u);
}

TEST(RaltRecordTest, SameTickAccessesAdd) {
  MergeParams p;
  RaltRecord m = MergeRecords(Rec("a", 4, 1.0), Rec("a", 4, 1.0), p);
  EXPECT_EQ(m.tick, 4u);
  EXPECT_DOUBLE_EQ(m.score, 2.0);
}

TEST(RaltRecordTest, OlderScoreDecays) {
  MergeParams p;
  p.alpha = 0.5;
  // Accesses at slices 3 and 5 seen from slice 5: 0.5^2 + 1.
  RaltRecord m = MergeRecords(Rec("a", 3, 1.0), Rec("a", 5, 1.0), p);
  EXPECT_EQ(m.tick, 5u);
  EXPECT_DOUBLE_EQ(m.score, 1.25);
}

TEST(RaltRecordTest, ZeroScoreIsIdentity) {
  MergeParams p;
  RaltRecord m = MergeRecords(Rec("a", 5, 0.0), Rec("a", 5, 2.5), p);
  EXPECT_EQ(m.tick, 5u);
  EXPECT_DOUBLE_EQ(m.score, 2.5);
}

TEST(RaltRecordTest, NewerValueLengthWins) {
  MergeParams p;
  RaltRecord m = MergeRecords(Rec("a", 9, 1.0, 300), Rec("a", 2, 1.0, 100), p);
  EXPECT_EQ(m.value_len, 300u);
}

TEST(RaltRecordTest, KeyMismatchThrows) {
  MergeParams p;
  EXPECT_THROW(MergeRecords(Rec("a", 1, 1.0), Rec("b", 1, 1.0), p), std::logic_error);
}

TEST(RaltRecordTest, MergeIsCommutative) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> score(0.0, 50.0);
  for (auto method : {ScoringMethod::kExpSmoothing, ScoringMethod::kLRU, ScoringMethod::kClock}) {
    MergeParams p;
    p.method = method;
    for (int i = 0; i < 10000; ++i) {
      RaltRecord a = Rec("k", rng() % 100, score(rng), rng() % 2000);
      RaltRecord b = Rec("k", rng() % 100, score(rng), rng() % 2000);
      RaltRecord ab = MergeRecords(a, b, p);
      RaltRecord ba = MergeRecords(b, a, p);
      ASSERT_EQ(ab.tick, ba.tick);
      ASSERT_EQ(ab.value_len, ba.value_len);
      ASSERT_NEAR(ab.score, ba.score, 1e-12 * std::max(1.0, std::abs(ab.score)));
    }
  }
}

// Folding per-access records in any order equals sum_i n_i * alpha^(t - i).
TEST(RaltRecordTest, FoldMatchesDirectSum) {
  std::mt19937_64 rng(2);
  MergeParams p;
  p.alpha = 0.9;
  for (int h = 0; h < 10000; ++h) {
    const int n = 1 + static_cast<int>(rng() % 40);
    std::vector<RaltRecord> accesses;
    uint64_t t = 0;
    for (int i = 0; i < n; ++i) {
      accesses.push_back(Rec("k", rng() % 60, 1.0));
      t = std::max(t, accesses.back().tick);
    }
    double direct = 0.0;
    for (const auto& a : accesses) direct += std::pow(p.alpha, static_cast<double>(t - a.tick));
    std::shuffle(accesses.begin(), accesses.end(), rng);
    RaltRecord acc = accesses[0];
    for (int i = 1; i < n; ++i) acc = MergeRecords(acc, accesses[static_cast<size_t>(i)], p);
    ASSERT_EQ(acc.tick, t);
    ASSERT_NEAR(acc.score, direct, 1e-9 * direct);
  }
}

TEST(RaltRecordTest, LruAndClockOracles) {
  std::mt19937_64 rng(3);
  MergeParams lru;
  lru.method = ScoringMethod::kLRU;
  MergeParams clock;
  clock.method = ScoringMethod::kClock;
  for (int h = 0; h < 1000; ++h) {
    double mx = 0.0;
    double sum = 0.0;
    RaltRecord a = Rec("k", 0, 0.0);
    RaltRecord c = Rec("k", 0, 0.0);
    for (int i = 0; i < 20; ++i) {
      const double s = static_cast<double>(rng() % 100000);
      mx = std::max(mx, s);
      a = MergeRecords(a, Rec("k", rng() % 10, s), lru);
      c = MergeRecords(c, Rec("k", rng() % 10, 1.0), clock);
      sum += 1.0;
    }
    ASSERT_EQ(a.score, mx);
    ASSERT_EQ(c.score, sum);
  }
  // The CLOCK counter is 32 bits wide.
  RaltRecord big = MergeRecords(Rec("k", 0, 4294967295.0), Rec("k", 0, 5.0), clock);
  EXPECT_EQ(big.score, 4294967295.0);
}

TEST(RaltRecordTest, ScoreAtDecays) {
  MergeParams p;
  p.alpha = 0.5;
  RaltRecord r = Rec("k", 2, 8.0);
  EXPECT_DOUBLE_EQ(ScoreAt(r, 5, p), 1.0);
  p.method = ScoringMethod::kLRU;
  EXPECT_DOUBLE_EQ(ScoreAt(r, 5, p), 8.0);
}

TEST(AutotuneCounterTest, InsertAndHit) {
  AutotuneParams p;
  p.l_hs = 1;
  p.r_hs = 10;
  auto fresh = autotune::OnInsert(p, 0);
  EXPECT_EQ(fresh.counter, 1u);
  EXPECT_FALSE(fresh.tag);
  p.delta_c = 2;
  EXPECT_EQ(autotune::OnInsert(p, 0).counter, 2u);
  p.delta_c = 1;

  auto hit = autotune::OnHit(p, {1, false, 0}, {1, false, 0});
  EXPECT_EQ(hit.counter, 2u);
  EXPECT_TRUE(hit.tag);
  auto sat = autotune::OnHit(p, {10, true, 0}, {1, false, 0});
  EXPECT_EQ(sat.counter, 10u);
}

TEST(AutotuneCounterTest, LazyDecay) {
  EXPECT_EQ(autotune::EffectiveCounter(3, 5, 7), 1u);
  EXPECT_EQ(autotune::EffectiveCounter(3, 5, 9), 0u);
  EXPECT_FALSE(autotune::IsStable(autotune::EffectiveCounter(2, 0, 2), true));
  EXPECT_TRUE(autotune::IsStable(autotune::EffectiveCounter(2, 0, 1), true));
  // Merging decays both sides to the newer epoch first.
  AutotuneParams p;
  p.l_hs = 1;
  p.r_hs = 10;
  auto m = autotune::OnHit(p, {4, true, 1}, {1, false, 3});
  EXPECT_EQ(m.counter, 3u);
  EXPECT_EQ(m.epoch, 3u);
}

TEST(AutotuneCounterTest, Limits) {
  AutotuneParams p;
  p.l_hs = 100;
  p.r_hs = 7000;
  EXPECT_EQ(autotune::HotSetLimit(p, 0), 100u);
  EXPECT_EQ(autotune::HotSetLimit(p, 5000), 5500u);
  EXPECT_EQ(autotune::HotSetLimit(p, 6400), 7000u);
  EXPECT_EQ(p.EffectiveUnstableCap(), 350u);
  EXPECT_EQ(autotune::PhysicalLimit(p, 1000), 1350u);
}

}  // namespace
}  // namespace tierkv
