#pragma once

#include <string>
#include <string_view>
#include <utility>

namespace tierkv {

// Outcome of a fallible storage operation. Cheap to copy when ok().
class Status {
 public:
  enum class Code { kOk, kNotFound, kIOError, kInvalidArgument, kCorruption, kBusy, kAborted };

  Status() = default;

  static Status OK() { return Status(); }
  static Status NotFound(std::string_view msg = {}) { return Status(Code::kNotFound, msg); }
  static Status IOError(std::string_view msg) { return Status(Code::kIOError, msg); }
  static Status InvalidArgument(std::string_view msg) {
    return Status(Code::kInvalidArgument, msg);
  }
  static Status Corruption(std::string_view msg) { return Status(Code::kCorruption, msg); }
  static Status Busy(std::string_view msg = {}) { return Status(Code::kBusy, msg); }
  static Status Aborted(std::string_view msg = {}) { return Status(Code::kAborted, msg); }

  bool ok() const { return code_ == Code::kOk; }
  bool IsNotFound() const { return code_ == Code::kNotFound; }
  bool IsIOError() const { return code_ == Code::kIOError; }
  bool IsInvalidArgument() const { return code_ == Code::kInvalidArgument; }
  bool IsCorruption() const { return code_ == Code::kCorruption; }
  bool IsBusy() const { return code_ == Code::kBusy; }
  bool IsAborted() const { return code_ == Code::kAborted; }

  Code code() const { return code_; }
  const std::string& message() const { return msg_; }

  std::string ToString() const {
    const char* name = "OK";
    switch (code_) {
      case Code::kOk: return name;
      case Code::kNotFound: name = "NotFound"; break;
      case Code::kIOError: name = "IO error"; break;
      case Code::kInvalidArgument: name = "Invalid argument"; break;
      case Code::kCorruption: name = "Corruption"; break;
      case Code::kBusy: name = "Busy"; break;
      case Code::kAborted: name = "Aborted"; break;
    }
    return msg_.empty() ? std::string(name) : std::string(name) + ": " + msg_;
  }

 private:
  Status(Code code, std::string_view msg) : code_(code), msg_(msg) {}

  Code code_ = Code::kOk;
  std::string msg_;
};

}  // namespace tierkv
