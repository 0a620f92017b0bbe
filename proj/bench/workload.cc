#include "workload.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "tierkv/coding.h"

namespace tierkv::bench {

Status WorkloadSpec::Validate() const {
  if (key_bytes < 12 || key_bytes > 64) return Status::InvalidArgument("key_bytes out of range");
  if (record_bytes < key_bytes + 16) return Status::InvalidArgument("record_bytes too small");
  if (load_records() == 0) return Status::InvalidArgument("load phase holds no records");
  const auto frac_ok = [](double f) { return f > 0.0 && f < 0.5; };
  if (skew.kind == SkewKind::kHotspot && !frac_ok(skew.hot_fraction)) {
    return Status::InvalidArgument("hotspot fraction must be in (0, 0.5)");
  }
  if (skew.kind == SkewKind::kShift && (!frac_ok(skew.hot_fraction) || !frac_ok(skew.hot_fraction2))) {
    return Status::InvalidArgument("shift fractions must be in (0, 0.5)");
  }
  if (!(skew.hot_op_fraction >= 0.0 && skew.hot_op_fraction <= 1.0)) {
    return Status::InvalidArgument("hot op fraction must be in [0, 1]");
  }
  if (!(skew.zipf_s > 0.0) || skew.zipf_s == 1.0) return Status::InvalidArgument("bad zipf exponent");
  return Status::OK();
}

Status ParseMix(std::string_view s, Mix* out) {
  if (s == "ro") *out = Mix::kReadOnly;
  else if (s == "rw") *out = Mix::kReadWrite;
  else if (s == "wh") *out = Mix::kWriteHeavy;
  else if (s == "uh") *out = Mix::kUpdateHeavy;
  else return Status::InvalidArgument("unknown workload: " + std::string(s));
  return Status::OK();
}

namespace {

bool ParseFraction(std::string_view s, double* out) {
  std::string str(s);
  bool percent = false;
  if (!str.empty() && str.back() == '%') {
    percent = true;
    str.pop_back();
  }
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size()) return false;
  const double f = percent ? v / 100.0 : v;
  if (!(f > 0.0 && f <= 1.0)) return false;
  *out = f;
  return true;
}

}  // namespace

Status ParseSkew(std::string_view s, Skew* out) {
  Skew skew = *out;
  if (s == "uniform") {
    skew.kind = SkewKind::kUniform;
  } else if (s == "zipfian") {
    skew.kind = SkewKind::kZipfian;
  } else if (s.substr(0, 8) == "hotspot:") {
    skew.kind = SkewKind::kHotspot;
    if (!ParseFraction(s.substr(8), &skew.hot_fraction)) {
      return Status::InvalidArgument("bad hotspot fraction: " + std::string(s));
    }
  } else if (s.substr(0, 6) == "shift:") {
    skew.kind = SkewKind::kShift;
    const std::string_view rest = s.substr(6);
    const size_t comma = rest.find(',');
    if (comma == std::string_view::npos || !ParseFraction(rest.substr(0, comma), &skew.hot_fraction) ||
        !ParseFraction(rest.substr(comma + 1), &skew.hot_fraction2)) {
      return Status::InvalidArgument("bad shift fractions: " + std::string(s));
    }
  } else {
    return Status::InvalidArgument("unknown skew: " + std::string(s));
  }
  *out = skew;
  return Status::OK();
}

const char* MixName(Mix m) {
  switch (m) {
    case Mix::kReadOnly: return "ro";
    case Mix::kReadWrite: return "rw";
    case Mix::kWriteHeavy: return "wh";
    case Mix::kUpdateHeavy: return "uh";
  }
  return "?";
}

std::string SkewName(const Skew& s) {
  char buf[64];
  switch (s.kind) {
    case SkewKind::kUniform: return "uniform";
    case SkewKind::kZipfian: return "zipfian";
    case SkewKind::kHotspot:
      std::snprintf(buf, sizeof(buf), "hotspot:%g", s.hot_fraction);
      return buf;
    case SkewKind::kShift:
      std::snprintf(buf, sizeof(buf), "shift:%g,%g", s.hot_fraction, s.hot_fraction2);
      return buf;
  }
  return "?";
}

namespace {

// splitmix64 finalizer; a bijection on 64-bit integers.
uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::string KeyName(uint64_t id, size_t key_bytes) {
  char digits[32];
  std::snprintf(digits, sizeof(digits), "%020llu", static_cast<unsigned long long>(Mix64(id)));
  std::string key = "user";
  const size_t want = key_bytes - 4;
  if (want > 20) key.append(want - 20, '0');
  key.append(digits + (want < 20 ? 20 - want : 0));
  return key;
}

ZipfianGenerator::ZipfianGenerator(uint64_t n, double s) : n_(0), s_(s) {
  if (n == 0) throw std::logic_error("zipfian over zero items");
  zeta2_ = 1.0 + std::pow(0.5, s_);
  Grow(n);
}

void ZipfianGenerator::Grow(uint64_t n) {
  if (n <= n_) return;
  for (uint64_t i = n_ + 1; i <= n; ++i) zeta_n_ += std::pow(static_cast<double>(i), -s_);
  n_ = n;
  Recompute();
}

void ZipfianGenerator::Recompute() {
  alpha_ = 1.0 / (1.0 - s_);
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n_), 1.0 - s_)) / (1.0 - zeta2_ / zeta_n_);
}

uint64_t ZipfianGenerator::Next(Rng* rng) {
  const double u = rng->Unit();
  const double uz = u * zeta_n_;
  if (uz < 1.0) return 1;
  if (n_ >= 2 && uz < 1.0 + std::pow(0.5, s_)) return 2;
  const uint64_t r =
      1 + static_cast<uint64_t>(static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(std::max<uint64_t>(r, 1), n_);
}

double ZipfianGenerator::Probability(uint64_t rank) const {
  return std::pow(static_cast<double>(rank), -s_) / zeta_n_;
}

KeyChooser::KeyChooser(const Skew& skew, uint64_t records, uint64_t run_ops)
    : skew_(skew),
      records_(records),
      phase1_ops_(static_cast<uint64_t>(static_cast<double>(run_ops) / (1.0 + skew.shift_phase_ratio))),
      zipf_(skew.kind == SkewKind::kZipfian ? records : 1, skew.zipf_s) {}

KeyChooser::Range KeyChooser::HotRange(uint64_t op_index) const {
  const auto count = [&](double f) {
    return std::max<uint64_t>(1, static_cast<uint64_t>(f * static_cast<double>(records_)));
  };
  if (skew_.kind == SkewKind::kShift && op_index >= phase1_ops_) {
    return Range{records_ / 2, count(skew_.hot_fraction2)};
  }
  return Range{0, count(skew_.hot_fraction)};
}

uint64_t KeyChooser::Next(Rng* rng, uint64_t op_index, uint64_t live) {
  switch (skew_.kind) {
    case SkewKind::kUniform:
      return rng->Below(live);
    case SkewKind::kZipfian:
      zipf_.Grow(live);
      return zipf_.Next(rng) - 1;
    case SkewKind::kHotspot:
    case SkewKind::kShift: {
      const Range hot = HotRange(op_index);
      if (rng->Unit() < skew_.hot_op_fraction) return hot.begin + rng->Below(hot.count);
      // Cold ops are uniform over everything outside the hot range.
      const uint64_t pick = rng->Below(live - hot.count);
      return pick < hot.begin ? pick : pick + hot.count;
    }
  }
  return 0;
}

bool KeyChooser::IsHot(uint64_t id, uint64_t op_index) const {
  if (skew_.kind != SkewKind::kHotspot && skew_.kind != SkewKind::kShift) return false;
  const Range hot = HotRange(op_index);
  return id >= hot.begin && id < hot.begin + hot.count;
}

uint64_t KeyChooser::FinalHotRecords() const {
  if (skew_.kind != SkewKind::kHotspot && skew_.kind != SkewKind::kShift) return 0;
  return HotRange(~0ull).count;
}

WorkloadGenerator::WorkloadGenerator(const WorkloadSpec& spec)
    : spec_(spec),
      records_(spec.load_records()),
      rng_(spec.seed * 0x9e3779b97f4a7c15ull + 0x5eed),
      chooser_(spec.skew, spec.load_records(), spec.run_ops) {}

Op WorkloadGenerator::NextRunOp() {
  const uint64_t i = index_++;
  double write_ratio = 0.0;
  OpType write = OpType::kInsert;
  switch (spec_.mix) {
    case Mix::kReadOnly: write_ratio = 0.0; break;
    case Mix::kReadWrite: write_ratio = 0.25; break;
    case Mix::kWriteHeavy: write_ratio = 0.5; break;
    case Mix::kUpdateHeavy:
      write_ratio = 0.5;
      write = OpType::kUpdate;
      break;
  }
  if (write_ratio > 0.0 && rng_.Unit() < write_ratio) {
    if (write == OpType::kInsert) return Op{OpType::kInsert, records_ + inserted_++};
    return Op{OpType::kUpdate, chooser_.Next(&rng_, i, live_records())};
  }
  return Op{OpType::kRead, chooser_.Next(&rng_, i, live_records())};
}

ValueFactory::ValueFactory(uint64_t seed, size_t value_bytes) : value_bytes_(value_bytes) {
  if (value_bytes < 16) throw std::logic_error("values need at least 16 bytes");
  Rng rng(seed ^ 0x76616c7565ull);
  pool_.resize(std::max<size_t>(value_bytes * 4, 1 << 16));
  for (auto& c : pool_) c = static_cast<char>(rng.Next());
}

std::string ValueFactory::Make(uint64_t id, uint64_t stamp) const {
  std::string v;
  v.reserve(value_bytes_);
  PutFixed64(&v, stamp);
  PutFixed64(&v, id);
  const size_t rest = value_bytes_ - 16;
  const size_t off = Mix64(id * 31 + stamp) % (pool_.size() - rest + 1);
  v.append(pool_, off, rest);
  return v;
}

uint64_t ValueFactory::ValueStamp(std::string_view value) {
  return value.size() >= 8 ? DecodeFixed64(value.data()) : 0;
}

uint64_t ValueFactory::ValueId(std::string_view value) {
  return value.size() >= 16 ? DecodeFixed64(value.data() + 8) : 0;
}

}  // namespace tierkv::bench
