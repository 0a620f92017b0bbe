#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tierkv/status.h"

namespace tierkv::bench {

enum class Mix { kReadOnly, kReadWrite, kWriteHeavy, kUpdateHeavy };
enum class SkewKind { kUniform, kHotspot, kZipfian, kShift };

struct Skew {
  SkewKind kind = SkewKind::kUniform;
  double hot_fraction = 0.05;   // hotspot and the first shift phase
  double hot_fraction2 = 0.02;  // second shift phase
  double hot_op_fraction = 0.95;
  double zipf_s = 0.99;
  // Ops in the second shift phase per op in the first.
  double shift_phase_ratio = 1.36;
};

struct WorkloadSpec {
  Mix mix = Mix::kReadOnly;
  Skew skew;
  size_t key_bytes = 24;
  size_t record_bytes = 1024;  // key plus value
  uint64_t load_bytes = 1ull << 30;
  uint64_t run_ops = 1000000;
  uint64_t seed = 1;

  size_t value_bytes() const { return record_bytes > key_bytes + 16 ? record_bytes - key_bytes : 16; }
  uint64_t load_records() const { return load_bytes / record_bytes; }
  Status Validate() const;
};

// Parses "ro", "rw", "wh", "uh".
Status ParseMix(std::string_view s, Mix* out);
// Parses "uniform", "hotspot:F", "zipfian", "shift:F1,F2". Fractions may be
// written as 0.05 or 5%.
Status ParseSkew(std::string_view s, Skew* out);
const char* MixName(Mix m);
std::string SkewName(const Skew& s);

// Key of record `id`: "user" plus the zero-padded decimal of a bijective
// mix of the id, so consecutive ids scatter over the key space.
std::string KeyName(uint64_t id, size_t key_bytes = 24);

// Portable draws from a fully specified engine; std distributions are
// implementation-defined and would break cross-platform determinism.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  uint64_t Next() { return engine_(); }
  // Uniform in [0, n).
  uint64_t Below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }
  // Uniform in [0, 1).
  double Unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// Rank sampler for P(k) = 1 / (H_{N,s} k^s), k = 1..N. Uses the rejection
// free inversion of Gray et al. as in YCSB; the item count may grow.
class ZipfianGenerator {
 public:
  ZipfianGenerator(uint64_t n, double s);
  // Rank in [1, n].
  uint64_t Next(Rng* rng);
  void Grow(uint64_t n);
  uint64_t n() const { return n_; }
  // Exact pmf, for tests.
  double Probability(uint64_t rank) const;

 private:
  void Recompute();

  uint64_t n_;
  double s_;
  double zeta_n_ = 0;
  double zeta2_ = 0;
  double alpha_ = 0;
  double eta_ = 0;
};

// Picks record ids for reads and updates according to a skew.
class KeyChooser {
 public:
  KeyChooser(const Skew& skew, uint64_t records, uint64_t run_ops);
  // `live` is the current number of records (grows with inserts).
  uint64_t Next(Rng* rng, uint64_t op_index, uint64_t live);
  // Whether `id` is in the hot set active at `op_index`.
  bool IsHot(uint64_t id, uint64_t op_index) const;
  // Bytes of the hot set that is active at the end of the run.
  uint64_t FinalHotRecords() const;

 private:
  struct Range {
    uint64_t begin;
    uint64_t count;
  };
  Range HotRange(uint64_t op_index) const;

  Skew skew_;
  uint64_t records_;
  uint64_t phase1_ops_;
  ZipfianGenerator zipf_;
};

enum class OpType : uint8_t { kRead, kInsert, kUpdate };

struct Op {
  OpType type;
  uint64_t id;
};

// Deterministic operation stream: the load phase is ids 0..N-1 in order;
// the run phase draws ops by mix and skew. Same spec and seed give the
// same stream on every platform.
class WorkloadGenerator {
 public:
  explicit WorkloadGenerator(const WorkloadSpec& spec);
  uint64_t load_records() const { return records_; }
  Op NextRunOp();
  uint64_t ops_generated() const { return index_; }
  uint64_t live_records() const { return records_ + inserted_; }
  const KeyChooser& chooser() const { return chooser_; }

 private:
  WorkloadSpec spec_;
  uint64_t records_;
  Rng rng_;
  KeyChooser chooser_;
  uint64_t index_ = 0;
  uint64_t inserted_ = 0;
};

// Value bytes for a record id and write stamp. The stamp is recoverable
// with ValueStamp.
class ValueFactory {
 public:
  ValueFactory(uint64_t seed, size_t value_bytes);
  std::string Make(uint64_t id, uint64_t stamp) const;
  static uint64_t ValueStamp(std::string_view value);
  static uint64_t ValueId(std::string_view value);

 private:
  std::string pool_;
  size_t value_bytes_;
};

}  // namespace tierkv::bench
