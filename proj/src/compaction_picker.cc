#include "tierkv/compaction_picker.h"

#include <algorithm>

namespace tierkv {

double ScoreCandidate(uint64_t file_size, uint64_t overlapping_bytes, uint64_t hot_size,
                      bool inter_tier) {
  const double f = static_cast<double>(file_size);
  const double denom = f + static_cast<double>(overlapping_bytes);
  if (denom <= 0.0) return 0.0;
  if (!inter_tier) return f / denom;
  const double benefit = f - static_cast<double>(std::min(hot_size, file_size));
  return benefit / denom;
}

void ScoreCandidates(std::vector<CompactionCandidate>* candidates) {
  for (auto& c : *candidates) {
    const uint64_t hot = c.inter_tier ? std::min(c.hot_size, c.file_size) : 0;
    c.benefit = static_cast<double>(c.file_size - hot);
    c.score = ScoreCandidate(c.file_size, c.overlapping_bytes, c.hot_size, c.inter_tier);
  }
}

std::optional<size_t> PickCandidate(std::vector<CompactionCandidate>* candidates) {
  if (candidates->empty()) return std::nullopt;
  ScoreCandidates(candidates);
  const auto& cs = *candidates;
  const bool all_zero =
      std::all_of(cs.begin(), cs.end(), [](const CompactionCandidate& c) { return c.benefit <= 0.0; });
  size_t best = 0;
  for (size_t i = 1; i < cs.size(); ++i) {
    if (all_zero) {
      if (cs[i].creation_order < cs[best].creation_order) best = i;
      continue;
    }
    if (cs[i].score > cs[best].score ||
        (cs[i].score == cs[best].score && cs[i].creation_order < cs[best].creation_order)) {
      best = i;
    }
  }
  return best;
}

}  // namespace tierkv
