#include "oracle.h"

#include <array>
#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "workload.h"

namespace tierkv::bench {

Status OracleRun(const DBOptions& options, const OracleSpec& spec, OracleResult* out) {
  std::unique_ptr<DB> db;
  Status s = DB::Open(options, &db);
  if (!s.ok()) return s;
  *out = OracleResult{};
  Rng rng(spec.seed);
  const ValueFactory values(spec.seed, spec.value_bytes);
  std::map<std::string, std::string> model;
  std::string got;
  for (uint64_t i = 0; i < spec.ops; ++i) {
    const uint64_t id = rng.Below(spec.key_space);
    const std::string key = KeyName(id);
    const double r = rng.Unit();
    if (r < spec.put_fraction) {
      std::string v = values.Make(id, i + 1);
      s = db->Put(key, v);
      model[key] = std::move(v);
    } else if (r < spec.put_fraction + spec.delete_fraction) {
      s = db->Delete(key);
      model.erase(key);
    } else {
      ++out->gets;
      s = db->Get(key, &got);
      auto it = model.find(key);
      const bool want = it != model.end();
      const bool have = s.ok();
      if (!have && !s.IsNotFound()) break;
      s = Status::OK();
      if (want != have || (want && got != it->second)) {
        out->diverged = true;
        out->divergence_index = i;
        out->message = "op " + std::to_string(i) + " get " + key + ": expected " +
                       (want ? "stamp " + std::to_string(ValueFactory::ValueStamp(it->second)) : "absent") +
                       ", store returned " +
                       (have ? "stamp " + std::to_string(ValueFactory::ValueStamp(got)) : "absent");
        break;
      }
    }
    if (!s.ok()) break;
    ++out->ops;
  }
  Status c = db->Close();
  return s.ok() ? c : s;
}

namespace {

constexpr size_t kStripes = 1024;

void AtomicMax(std::atomic<uint64_t>* a, uint64_t v) {
  uint64_t cur = a->load(std::memory_order_relaxed);
  while (cur < v && !a->compare_exchange_weak(cur, v, std::memory_order_release)) {
  }
}

}  // namespace

Status StressRun(const DBOptions& options, const StressSpec& spec, StressResult* out) {
  std::unique_ptr<DB> db;
  Status s = DB::Open(options, &db);
  if (!s.ok()) return s;
  *out = StressResult{};

  const uint64_t n = spec.key_space;
  const uint64_t hot = std::max<uint64_t>(1, static_cast<uint64_t>(spec.hot_fraction * n));
  // completed[k]: newest write stamp of k whose call has returned.
  // deleted[k]: newest delete stamp of k issued so far.
  auto completed = std::make_unique<std::atomic<uint64_t>[]>(n);
  auto deleted = std::make_unique<std::atomic<uint64_t>[]>(n);
  std::vector<std::mutex> stripes(kStripes);
  std::atomic<uint64_t> stamp{1};
  std::atomic<uint64_t> violations{0}, gets{0}, ops_done{0};
  std::mutex msg_mu;
  std::string first;
  Status worker_error;
  const ValueFactory values(spec.seed, spec.value_bytes);
  const uint64_t per_worker = spec.ops / static_cast<uint64_t>(spec.workers);

  auto violation = [&](std::string msg) {
    if (violations.fetch_add(1) == 0) {
      std::lock_guard l(msg_mu);
      first = std::move(msg);
    }
  };

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  for (int w = 0; w < spec.workers; ++w) {
    threads.emplace_back([&, w] {
      Rng rng(spec.seed * 1315423911ull + static_cast<uint64_t>(w));
      std::string got;
      for (uint64_t i = 0; i < per_worker; ++i) {
        const uint64_t id = rng.Unit() < spec.hot_op_fraction ? rng.Below(hot) : rng.Below(n);
        const std::string key = KeyName(id);
        const double r = rng.Unit();
        Status st;
        if (r < spec.control_fraction) {
          switch (rng.Below(3)) {
            case 0: st = db->Flush(); break;
            case 1: db->SealPromotionCache(); break;
            default: {
              const int level = static_cast<int>(rng.Below(static_cast<uint64_t>(options.layout.bottommost_level())));
              st = db->CompactLevel(level);
              if (st.IsNotFound()) st = Status::OK();
            }
          }
          if (st.IsBusy()) st = Status::OK();
        } else if (r < spec.control_fraction + spec.put_fraction + spec.delete_fraction) {
          const bool del = r >= spec.control_fraction + spec.put_fraction;
          // Writes to one key are serialized so stamp order matches the
          // store's version order.
          std::lock_guard l(stripes[id % kStripes]);
          const uint64_t t = stamp.fetch_add(1);
          if (del) {
            AtomicMax(&deleted[id], t);
            st = db->Delete(key);
          } else {
            st = db->Put(key, values.Make(id, t));
          }
          completed[id].store(t, std::memory_order_release);
        } else {
          gets.fetch_add(1, std::memory_order_relaxed);
          const uint64_t required = completed[id].load(std::memory_order_acquire);
          st = db->Get(key, &got);
          if (st.ok()) {
            const uint64_t seen = ValueFactory::ValueStamp(got);
            if (ValueFactory::ValueId(got) != id) {
              violation("get " + key + " returned the value of another key");
            } else if (seen < required) {
              violation("get " + key + " returned stamp " + std::to_string(seen) +
                        " after write " + std::to_string(required) + " completed");
            }
          } else if (st.IsNotFound()) {
            st = Status::OK();
            if (required > 0 && deleted[id].load(std::memory_order_acquire) < required) {
              violation("get " + key + " returned absent after write " + std::to_string(required) +
                        " completed");
            }
          }
        }
        if (!st.ok()) {
          std::lock_guard l(msg_mu);
          if (worker_error.ok()) worker_error = st;
          return;
        }
        ops_done.fetch_add(1, std::memory_order_relaxed);
      }
    });
  }
  for (auto& t : threads) t.join();
  db->WaitForIdle();
  const RunMetrics m = db->GetMetrics();
  out->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out->ops = ops_done.load();
  out->gets = gets.load();
  out->violations = violations.load();
  out->first_violation = first;
  out->cache_inserts = m.cache_inserts;
  out->cache_insert_aborts = m.cache_insert_aborts;
  Status c = db->Close();
  if (!worker_error.ok()) return worker_error;
  return c;
}

}  // namespace tierkv::bench
