#pragma once

#include <cstdint>
#include <string>

#include "tierkv/db.h"

namespace tierkv::bench {

// Single-threaded mixed stream checked op by op against an ordered map.
struct OracleSpec {
  uint64_t ops = 100000;
  uint64_t key_space = 5000;
  double put_fraction = 0.40;
  double delete_fraction = 0.15;  // the rest are gets
  size_t value_bytes = 100;
  uint64_t seed = 1;
};

struct OracleResult {
  uint64_t ops = 0;
  uint64_t gets = 0;
  bool diverged = false;
  uint64_t divergence_index = 0;
  std::string message;
};

// Store directories in `options` must exist and be empty.
Status OracleRun(const DBOptions& options, const OracleSpec& spec, OracleResult* out);

// Concurrent puts, gets and deletes plus random flushes, promotion-cache
// seals and manual compactions. A get must return a version at least as
// new as every write to that key that completed before the get started.
struct StressSpec {
  int workers = 8;
  uint64_t ops = 1000000;  // total across workers
  uint64_t key_space = 20000;
  double hot_fraction = 0.05;
  double hot_op_fraction = 0.9;
  double put_fraction = 0.30;
  double delete_fraction = 0.05;
  double control_fraction = 0.0006;  // flush, seal or compact
  size_t value_bytes = 64;
  uint64_t seed = 1;
};

struct StressResult {
  uint64_t ops = 0;
  uint64_t gets = 0;
  uint64_t violations = 0;
  std::string first_violation;
  uint64_t cache_inserts = 0;
  uint64_t cache_insert_aborts = 0;
  double seconds = 0;

  double abort_rate() const {
    const uint64_t attempts = cache_inserts + cache_insert_aborts;
    return attempts == 0 ? 0.0 : static_cast<double>(cache_insert_aborts) / static_cast<double>(attempts);
  }
};

Status StressRun(const DBOptions& options, const StressSpec& spec, StressResult* out);

}  // namespace tierkv::bench
