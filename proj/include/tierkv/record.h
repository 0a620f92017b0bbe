#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "tierkv/coding.h"

namespace tierkv {

enum class ValueKind : uint8_t { kDelete = 0, kPut = 1 };

// Stored value of a data table entry: fixed64(seqno << 8 | kind) | user value.
constexpr size_t kRecordTagSize = 8;

inline std::string EncodeRecordValue(uint64_t seqno, ValueKind kind, std::string_view value) {
  std::string out;
  out.reserve(kRecordTagSize + value.size());
  PutFixed64(&out, (seqno << 8) | static_cast<uint64_t>(kind));
  out.append(value);
  return out;
}

struct RecordView {
  uint64_t seqno = 0;
  ValueKind kind = ValueKind::kPut;
  std::string_view value;
};

inline bool DecodeRecordValue(std::string_view stored, RecordView* out) {
  if (stored.size() < kRecordTagSize) return false;
  const uint64_t tag = DecodeFixed64(stored.data());
  out->seqno = tag >> 8;
  out->kind = static_cast<ValueKind>(tag & 0xff);
  out->value = stored.substr(kRecordTagSize);
  return out->kind == ValueKind::kPut || out->kind == ValueKind::kDelete;
}

}  // namespace tierkv
