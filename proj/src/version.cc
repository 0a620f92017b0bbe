#include "tierkv/version.h"

#include <algorithm>

namespace tierkv {

FileMeta::~FileMeta() {
  if (obsolete.load() && storage != nullptr) {
    table.reset();
    storage->DeleteFile(FileKind::kData, number);
  }
}

uint64_t Version::LevelBytes(int level) const {
  uint64_t s = 0;
  for (const auto& f : levels[static_cast<size_t>(level)]) s += f->file_size;
  return s;
}

std::vector<FileMetaPtr> Version::Overlapping(int level, std::string_view lo,
                                              std::string_view hi) const {
  std::vector<FileMetaPtr> out;
  const auto& files = levels[static_cast<size_t>(level)];
  if (level == 0) {
    for (const auto& f : files) {
      if (f->Overlaps(lo, hi)) out.push_back(f);
    }
    return out;
  }
  auto it = std::lower_bound(files.begin(), files.end(), lo,
                             [](const FileMetaPtr& f, std::string_view k) { return f->largest < k; });
  for (; it != files.end() && (*it)->smallest <= hi; ++it) out.push_back(*it);
  return out;
}

const FileMetaPtr* Version::FindFile(int level, std::string_view key) const {
  const auto& files = levels[static_cast<size_t>(level)];
  auto it = std::lower_bound(files.begin(), files.end(), key,
                             [](const FileMetaPtr& f, std::string_view k) { return f->largest < k; });
  if (it == files.end() || (*it)->smallest > key) return nullptr;
  return &*it;
}

bool Version::LevelsDisjoint() const {
  for (size_t l = 1; l < levels.size(); ++l) {
    for (size_t i = 0; i < levels[l].size(); ++i) {
      if (levels[l][i]->smallest > levels[l][i]->largest) return false;
      if (i > 0 && !(levels[l][i - 1]->largest < levels[l][i]->smallest)) return false;
    }
  }
  return true;
}

}  // namespace tierkv
