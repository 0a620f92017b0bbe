#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "tierkv/status.h"

namespace tierkv {

// Forward iterator over sorted (key, value) pairs.
class Iterator {
 public:
  virtual ~Iterator() = default;
  virtual bool Valid() const = 0;
  virtual void SeekToFirst() = 0;
  // Positions at the first key >= target.
  virtual void Seek(std::string_view target) = 0;
  virtual void Next() = 0;
  virtual std::string_view key() const = 0;
  virtual std::string_view value() const = 0;
  virtual Status status() const = 0;
};

// Merges sorted children. Equal keys are all yielded, lowest child index
// first, so callers list children from newest to oldest.
class MergingIterator final : public Iterator {
 public:
  explicit MergingIterator(std::vector<std::unique_ptr<Iterator>> children)
      : children_(std::move(children)) {}

  bool Valid() const override { return current_ >= 0; }
  void SeekToFirst() override {
    for (auto& c : children_) c->SeekToFirst();
    FindSmallest();
  }
  void Seek(std::string_view target) override {
    for (auto& c : children_) c->Seek(target);
    FindSmallest();
  }
  void Next() override {
    children_[static_cast<size_t>(current_)]->Next();
    FindSmallest();
  }
  std::string_view key() const override { return children_[static_cast<size_t>(current_)]->key(); }
  std::string_view value() const override {
    return children_[static_cast<size_t>(current_)]->value();
  }
  Status status() const override {
    for (const auto& c : children_) {
      Status s = c->status();
      if (!s.ok()) return s;
    }
    return Status::OK();
  }
  // Index of the child currently positioned at key().
  int current_child() const { return current_; }

 private:
  void FindSmallest() {
    current_ = -1;
    for (size_t i = 0; i < children_.size(); ++i) {
      if (!children_[i]->Valid()) continue;
      if (current_ < 0 || children_[i]->key() < children_[static_cast<size_t>(current_)]->key()) {
        current_ = static_cast<int>(i);
      }
    }
  }

  std::vector<std::unique_ptr<Iterator>> children_;
  int current_ = -1;
};

}  // namespace tierkv
