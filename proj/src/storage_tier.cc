#include "tierkv/storage_tier.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "tierkv/coding.h"

namespace tierkv {

namespace {

Status ErrnoStatus(const std::string& context) {
  return Status::IOError(context + ": " + std::strerror(errno));
}

Status WriteAll(int fd, const char* data, size_t n) {
  while (n > 0) {
    ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      return ErrnoStatus("write");
    }
    data += w;
    n -= static_cast<size_t>(w);
  }
  return Status::OK();
}

Status PreadAll(int fd, uint64_t offset, size_t n, char* dst) {
  while (n > 0) {
    ssize_t r = ::pread(fd, dst, n, static_cast<off_t>(offset));
    if (r < 0) {
      if (errno == EINTR) continue;
      return ErrnoStatus("pread");
    }
    if (r == 0) return Status::Corruption("short read");
    dst += r;
    offset += static_cast<uint64_t>(r);
    n -= static_cast<size_t>(r);
  }
  return Status::OK();
}

}  // namespace

StorageTier::StorageTier(std::filesystem::path root, TierId id, TierProfile profile)
    : root_(std::move(root)), id_(id), profile_(std::move(profile)) {}

StorageTier::~StorageTier() {
  for (auto& [key, f] : files_) {
    if (f.fd >= 0) ::close(f.fd);
  }
}

Status StorageTier::Open(const std::filesystem::path& root, TierId id, TierProfile profile,
                         std::unique_ptr<StorageTier>* out) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) {
    return Status::InvalidArgument("tier root is not a directory: " + root.string());
  }
  if (::access(root.c_str(), W_OK | X_OK) != 0) {
    return Status::InvalidArgument("tier root is not writable: " + root.string());
  }
  if (profile.read_latency.count() < 0 || profile.write_latency.count() < 0) {
    return Status::InvalidArgument("negative tier latency");
  }
  out->reset(new StorageTier(root, id, std::move(profile)));
  return Status::OK();
}

std::filesystem::path StorageTier::PathFor(FileKind kind, uint64_t number) const {
  const char* k = kind == FileKind::kData ? "data" : "ralt";
  return root_ / (std::string(k) + "-" + std::to_string(number) + ".sst");
}

void StorageTier::InjectLatency(std::chrono::nanoseconds per_block, size_t bytes) const {
  if (per_block.count() <= 0) return;
  size_t blocks = (bytes + kLatencyBlockSize - 1) / kLatencyBlockSize;
  if (blocks == 0) blocks = 1;
  std::this_thread::sleep_for(per_block * static_cast<int64_t>(blocks));
}

Status StorageTier::WriteFile(FileKind kind, uint64_t number, std::string_view payload) {
  const uint64_t key = Key(kind, number);
  {
    std::shared_lock lock(files_mu_);
    if (files_.count(key) != 0) {
      throw std::logic_error("duplicate file name " + PathFor(kind, number).string());
    }
  }
  InjectLatency(profile_.write_latency, payload.size() + kSealFooterSize);

  auto path = PathFor(kind, number);
  int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_RDWR | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw std::logic_error("duplicate file name " + path.string());
    }
    return ErrnoStatus("open " + path.string());
  }
  std::string footer;
  PutFixed64(&footer, payload.size());
  PutFixed64(&footer, kSealMagic);
  Status s = WriteAll(fd, payload.data(), payload.size());
  if (s.ok()) s = WriteAll(fd, footer.data(), footer.size());
  if (!s.ok()) {
    ::close(fd);
    ::unlink(path.c_str());
    return s;
  }
  const uint64_t disk_size = payload.size() + kSealFooterSize;
  {
    std::unique_lock lock(files_mu_);
    files_[key] = OpenFile{fd, disk_size};
  }
  Counters& c = counters_[static_cast<int>(kind)];
  c.bytes_written.fetch_add(disk_size, std::memory_order_relaxed);
  c.write_ops.fetch_add(1, std::memory_order_relaxed);
  live_bytes_.fetch_add(disk_size, std::memory_order_relaxed);
  return Status::OK();
}

Status StorageTier::GetFd(FileKind kind, uint64_t number, int* fd, uint64_t* disk_size) {
  const uint64_t key = Key(kind, number);
  std::shared_lock lock(files_mu_);
  auto it = files_.find(key);
  if (it == files_.end()) {
    return Status::NotFound(PathFor(kind, number).string());
  }
  *fd = it->second.fd;
  *disk_size = it->second.disk_size;
  return Status::OK();
}

Status StorageTier::ReadRange(FileKind kind, uint64_t number, uint64_t offset, size_t n,
                              std::string* out) {
  // The shared lock is held across the read so a concurrent delete cannot
  // close the descriptor underneath us.
  const uint64_t key = Key(kind, number);
  std::shared_lock lock(files_mu_);
  auto it = files_.find(key);
  if (it == files_.end()) return Status::NotFound(PathFor(kind, number).string());
  const uint64_t payload_size = it->second.disk_size - kSealFooterSize;
  if (offset + n > payload_size) {
    return Status::InvalidArgument("read past end of " + PathFor(kind, number).string());
  }
  InjectLatency(profile_.read_latency, n);
  out->resize(n);
  Status s = PreadAll(it->second.fd, offset, n, out->data());
  if (!s.ok()) return s;
  Counters& c = counters_[static_cast<int>(kind)];
  c.bytes_read.fetch_add(n, std::memory_order_relaxed);
  c.read_ops.fetch_add(1, std::memory_order_relaxed);
  return Status::OK();
}

Status StorageTier::ReadFile(FileKind kind, uint64_t number, std::string* out) {
  const uint64_t key = Key(kind, number);
  std::shared_lock lock(files_mu_);
  auto it = files_.find(key);
  if (it == files_.end()) return Status::NotFound(PathFor(kind, number).string());
  const uint64_t disk_size = it->second.disk_size;
  InjectLatency(profile_.read_latency, disk_size);
  std::string buf(disk_size, '\0');
  Status s = PreadAll(it->second.fd, 0, disk_size, buf.data());
  if (!s.ok()) return s;
  Counters& c = counters_[static_cast<int>(kind)];
  c.bytes_read.fetch_add(disk_size, std::memory_order_relaxed);
  c.read_ops.fetch_add(1, std::memory_order_relaxed);
  const char* f = buf.data() + disk_size - kSealFooterSize;
  if (DecodeFixed64(f + 8) != kSealMagic || DecodeFixed64(f) != disk_size - kSealFooterSize) {
    return Status::Corruption("bad seal footer in " + PathFor(kind, number).string());
  }
  buf.resize(disk_size - kSealFooterSize);
  *out = std::move(buf);
  return Status::OK();
}

Status StorageTier::DeleteFile(FileKind kind, uint64_t number) {
  const uint64_t key = Key(kind, number);
  OpenFile f;
  {
    std::unique_lock lock(files_mu_);
    auto it = files_.find(key);
    if (it == files_.end()) return Status::NotFound(PathFor(kind, number).string());
    f = it->second;
    files_.erase(it);
  }
  ::close(f.fd);
  live_bytes_.fetch_sub(f.disk_size, std::memory_order_relaxed);
  if (::unlink(PathFor(kind, number).c_str()) != 0) {
    return ErrnoStatus("unlink " + PathFor(kind, number).string());
  }
  return Status::OK();
}

Status StorageTier::AdoptFile(FileKind kind, uint64_t number) {
  auto path = PathFor(kind, number);
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return ErrnoStatus("open " + path.string());
  struct stat st;
  if (::fstat(fd, &st) != 0 || static_cast<uint64_t>(st.st_size) < kSealFooterSize) {
    ::close(fd);
    return Status::Corruption("unsealed file " + path.string());
  }
  const uint64_t disk_size = static_cast<uint64_t>(st.st_size);
  char footer[kSealFooterSize];
  Status s = PreadAll(fd, disk_size - kSealFooterSize, kSealFooterSize, footer);
  if (!s.ok() || DecodeFixed64(footer + 8) != kSealMagic ||
      DecodeFixed64(footer) != disk_size - kSealFooterSize) {
    ::close(fd);
    return s.ok() ? Status::Corruption("bad seal footer in " + path.string()) : s;
  }
  std::unique_lock lock(files_mu_);
  if (!files_.emplace(Key(kind, number), OpenFile{fd, disk_size}).second) {
    ::close(fd);
    throw std::logic_error("file adopted twice " + path.string());
  }
  live_bytes_.fetch_add(disk_size, std::memory_order_relaxed);
  return Status::OK();
}

bool StorageTier::Exists(FileKind kind, uint64_t number) const {
  std::shared_lock lock(files_mu_);
  return files_.count(Key(kind, number)) != 0;
}

uint64_t StorageTier::FileSize(FileKind kind, uint64_t number) const {
  std::shared_lock lock(files_mu_);
  auto it = files_.find(Key(kind, number));
  return it == files_.end() ? 0 : it->second.disk_size;
}

IoStats StorageTier::stats(FileKind kind) const {
  const Counters& c = counters_[static_cast<int>(kind)];
  IoStats s;
  s.bytes_read = c.bytes_read.load(std::memory_order_relaxed);
  s.bytes_written = c.bytes_written.load(std::memory_order_relaxed);
  s.read_ops = c.read_ops.load(std::memory_order_relaxed);
  s.write_ops = c.write_ops.load(std::memory_order_relaxed);
  return s;
}

IoStats StorageTier::stats() const {
  IoStats a = stats(FileKind::kData);
  IoStats b = stats(FileKind::kRalt);
  a.bytes_read += b.bytes_read;
  a.bytes_written += b.bytes_written;
  a.read_ops += b.read_ops;
  a.write_ops += b.write_ops;
  return a;
}

void StorageTier::ResetStats() {
  for (auto& c : counters_) {
    c.bytes_read.store(0);
    c.bytes_written.store(0);
    c.read_ops.store(0);
    c.write_ops.store(0);
  }
}

}  // namespace tierkv
