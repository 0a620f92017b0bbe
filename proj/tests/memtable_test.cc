#include "tierkv/memtable.h"

#include <gtest/gtest.h>

namespace tierkv {
namespace {

TEST(MemTableTest, NewestSeqnoWins) {
  MemTable mem(1);
  mem.Add("k", 5, ValueKind::kPut, "five");
  mem.Add("k", 3, ValueKind::kPut, "three");
  MemTable::Entry e;
  ASSERT_TRUE(mem.Get("k", &e));
  EXPECT_EQ(e.value, "five");
  EXPECT_EQ(mem.SeqnoOf("k"), 5u);
  mem.Add("k", 7, ValueKind::kDelete, "");
  ASSERT_TRUE(mem.Get("k", &e));
  EXPECT_EQ(e.kind, ValueKind::kDelete);
  EXPECT_EQ(mem.SeqnoOf("absent"), 0u);
}

TEST(MemTableTest, KeysSortedAndBytesTracked) {
  MemTable mem(2, true);
  EXPECT_TRUE(mem.empty());
  mem.Add("b", 1, ValueKind::kPut, "xx");
  mem.Add("a", 2, ValueKind::kPut, "y");
  EXPECT_EQ(mem.Keys(), (std::vector<std::string>{"a", "b"}));
  const size_t before = mem.ApproximateBytes();
  mem.Add("a", 3, ValueKind::kPut, "yyyy");
  EXPECT_EQ(mem.ApproximateBytes(), before + 3);
  EXPECT_EQ(mem.size(), 2u);
  EXPECT_TRUE(mem.promotion());
  EXPECT_EQ(mem.id(), 2u);
}

}  // namespace
}  // namespace tierkv
