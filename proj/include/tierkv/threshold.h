#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tierkv/ralt_record.h"

namespace tierkv {

// Size-weighted sampling estimate of the score threshold that retains a
// target amount of size. Records are streamed in any fixed order (RALT uses
// key order); each of N points drawn uniformly from (0, total] selects the
// record whose cumulative-size interval contains it, so a record is sampled
// with probability proportional to its size.
//
// `total_size` may be an upper bound of the streamed total. Points past the
// end of the stream are simply not sampled; the kept points are still uniform
// over the streamed prefix, so the threshold uses the streamed total.
class ThresholdEstimator {
 public:
  ThresholdEstimator(uint64_t total_size, size_t sample_count, uint64_t seed)
      : total_(total_size) {
    if (total_ == 0 || sample_count == 0) return;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<uint64_t> dist(1, total_);
    points_.resize(sample_count);
    for (auto& p : points_) p = dist(rng);
    std::sort(points_.begin(), points_.end());
    samples_.reserve(sample_count);
  }

  // Feeds the next record of the ordered scan.
  void Add(uint64_t size, const RankKey& rank) {
    const uint64_t end = prefix_ + size;
    while (next_ < points_.size() && points_[next_] <= end) {
      samples_.push_back(rank);
      ++next_;
    }
    prefix_ = end;
  }

  // Threshold S' such that records with rank >= S' hold about `target` bytes.
  // Returns nullopt when there is nothing to evict from (total == 0).
  std::optional<RankKey> Threshold(uint64_t target) {
    const uint64_t total = prefix_ != 0 ? prefix_ : total_;
    if (total == 0) return std::nullopt;
    if (target >= total || samples_.empty()) return RankKey::Lowest();
    if (target == 0) return RankKey::Highest();
    const double want = std::ceil(static_cast<double>(samples_.size()) *
                                  static_cast<double>(target) / static_cast<double>(total));
    size_t k = static_cast<size_t>(std::clamp(want, 1.0, static_cast<double>(samples_.size())));
    // k-th largest sample.
    std::nth_element(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     samples_.end(), [](const RankKey& a, const RankKey& b) { return b < a; });
    return samples_[k - 1];
  }

  uint64_t total() const { return total_; }
  uint64_t streamed() const { return prefix_; }
  size_t samples_taken() const { return samples_.size(); }

 private:
  uint64_t total_;
  uint64_t prefix_ = 0;
  size_t next_ = 0;
  std::vector<uint64_t> points_;
  std::vector<RankKey> samples_;
};

}  // namespace tierkv
