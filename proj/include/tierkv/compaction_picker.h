#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace tierkv {

struct CompactionCandidate {
  uint64_t file_size = 0;
  uint64_t overlapping_bytes = 0;  // target-level tables overlapping the file
  uint64_t hot_size = 0;           // RALT estimate over the file's range
  uint64_t creation_order = 0;
  bool inter_tier = false;
  double benefit = 0.0;  // filled by ScoreCandidates
  double score = 0.0;
};

// Intra-tier: F / (F + O). Inter-tier: (F - min(H, F)) / (F + O); hot bytes
// are kept on FD, so they bring no benefit.
double ScoreCandidate(uint64_t file_size, uint64_t overlapping_bytes, uint64_t hot_size,
                      bool inter_tier);

void ScoreCandidates(std::vector<CompactionCandidate>* candidates);

// Index of the table to compact: highest score, older first on ties, and
// the oldest table when every benefit is zero. nullopt when empty.
std::optional<size_t> PickCandidate(std::vector<CompactionCandidate>* candidates);

}  // namespace tierkv
