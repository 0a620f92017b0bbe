#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tierkv {

// Standard bloom filter with double hashing. The serialized form is the bit
// array followed by one byte holding the probe count.
class BloomFilterBuilder {
 public:
  explicit BloomFilterBuilder(int bits_per_key = 10);

  void AddKey(std::string_view key);
  size_t num_keys() const { return hashes_.size(); }

  // Serializes the filter. An empty builder yields an empty string, which
  // BloomFilter treats as "matches nothing".
  std::string Finish() const;

 private:
  int bits_per_key_;
  std::vector<uint64_t> hashes_;
};

class BloomFilter {
 public:
  BloomFilter() = default;
  explicit BloomFilter(std::string data) : data_(std::move(data)) {}

  bool MayContain(std::string_view key) const;
  bool empty() const { return data_.empty(); }
  size_t ByteSize() const { return data_.size(); }
  const std::string& data() const { return data_; }

 private:
  std::string data_;
};

}  // namespace tierkv
