#include "tierkv/bloom.h"

#include <algorithm>
#include <cmath>

#include "tierkv/coding.h"

namespace tierkv {

namespace {
constexpr uint64_t kBloomSeed = 0x9e3779b97f4a7c15ULL;
}

BloomFilterBuilder::BloomFilterBuilder(int bits_per_key) : bits_per_key_(bits_per_key) {}

void BloomFilterBuilder::AddKey(std::string_view key) {
  hashes_.push_back(HashBytes(key, kBloomSeed));
}

std::string BloomFilterBuilder::Finish() const {
  if (hashes_.empty()) return {};
  // k = ln(2) * bits/key, clamped to a sane range.
  int probes = static_cast<int>(std::lround(bits_per_key_ * 0.69));
  probes = std::clamp(probes, 1, 30);
  size_t bits = std::max<size_t>(64, hashes_.size() * static_cast<size_t>(bits_per_key_));
  size_t bytes = (bits + 7) / 8;
  bits = bytes * 8;
  std::string out(bytes + 1, '\0');
  for (uint64_t h : hashes_) {
    uint64_t h1 = h;
    uint64_t h2 = (h >> 32) | (h << 32);
    h2 |= 1;
    for (int i = 0; i < probes; ++i) {
      uint64_t bit = (h1 + static_cast<uint64_t>(i) * h2) % bits;
      out[bit / 8] = static_cast<char>(out[bit / 8] | (1 << (bit % 8)));
    }
  }
  out[bytes] = static_cast<char>(probes);
  return out;
}

bool BloomFilter::MayContain(std::string_view key) const {
  if (data_.size() < 2) return false;
  const size_t bytes = data_.size() - 1;
  const uint64_t bits = bytes * 8;
  const int probes = static_cast<unsigned char>(data_[bytes]);
  uint64_t h1 = HashBytes(key, kBloomSeed);
  uint64_t h2 = (h1 >> 32) | (h1 << 32);
  h2 |= 1;
  for (int i = 0; i < probes; ++i) {
    uint64_t bit = (h1 + static_cast<uint64_t>(i) * h2) % bits;
    if ((data_[bit / 8] & (1 << (bit % 8))) == 0) return false;
  }
  return true;
}

}  // namespace tierkv
