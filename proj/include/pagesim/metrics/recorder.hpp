#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pagesim/cache/memory_manager.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/metrics/records.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/sim/task.hpp"

namespace pagesim::metrics {

// Point-in-time memory occupancy. total_used counts application (anonymous)
// memory plus the page cache; free memory is total_mem - total_used.
struct MemorySample {
  sim::SimTime time = 0;
  std::uint64_t total_used = 0;
  std::uint64_t cached = 0;
  std::uint64_t dirty = 0;
  std::uint64_t anonymous = 0;
};

// Per-file cache occupancy at one instant, name-sorted.
struct CacheSnapshot {
  sim::SimTime time = 0;
  std::vector<std::pair<std::string, cache::FileUsage>> files;
};

inline MemorySample sample_memory(sim::SimTime now,
                                  const cache::MemoryManager* mm) {
  if (mm == nullptr) return {now, 0, 0, 0, 0};
  return {now, mm->anonymous() + mm->cached(), mm->cached(), mm->dirty(),
          mm->anonymous()};
}

inline CacheSnapshot snapshot_cache(sim::SimTime now,
                                    const cache::MemoryManager* mm) {
  if (mm == nullptr) return {now, {}};
  return {now, mm->per_file_usage()};
}

// CSV exports. Times are seconds with 6 decimals, sizes whole bytes.

inline std::string fmt_time(sim::SimTime t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

inline void write_memory_csv(const std::string& path,
                             const std::vector<MemorySample>& rows) {
  std::ofstream out = open_output(path);
  out << "time,total_used,cached,dirty,anonymous\n";
  for (const MemorySample& s : rows) {
    out << fmt_time(s.time) << ',' << s.total_used << ',' << s.cached << ','
        << s.dirty << ',' << s.anonymous << '\n';
  }
}

inline void write_ops_csv(const std::string& path,
                          const std::vector<OpRecord>& rows) {
  std::ofstream out = open_output(path);
  out << "instance,task,kind,file,start,end\n";
  for (const OpRecord& r : rows) {
    out << r.instance << ',' << r.task << ',' << label(r.kind) << ','
        << r.file << ',' << fmt_time(r.start) << ',' << fmt_time(r.end)
        << '\n';
  }
}

inline void write_snapshots_csv(const std::string& path,
                                const std::vector<CacheSnapshot>& rows) {
  std::ofstream out = open_output(path);
  out << "time,file,cached,dirty\n";
  for (const CacheSnapshot& s : rows) {
    for (const auto& [file, usage] : s.files) {
      out << fmt_time(s.time) << ',' << file << ',' << usage.cached << ','
          << usage.dirty << '\n';
    }
  }
}

// Collects a run's observables: a memory profile (event-driven samples on
// every cache state change, plus an optional fixed cadence), the application
// operation log, and a cache snapshot after every file read or write.
//
// Costs no simulated time. The recorder must outlive the manager's use of
// the observer it registers.
class Recorder {
 public:
  Recorder(sim::Engine& eng, const cache::MemoryManager* mm)
      : eng_(eng), mm_(mm) {}

  // Registers the event-driven sampler. Call at most once.
  void attach(cache::MemoryManager& mm) {
    mm.add_observer(
        [this](const cache::MemoryManager&) { take_memory_sample(); });
  }

  // Samples immediately, then every `dt`. Spawn as a daemon.
  sim::Task<void> cadence_process(double dt) {
    if (!(dt > 0)) throw ConfigError("sampling cadence must be positive");
    return cadence_loop(dt);
  }

  // OpSink-compatible; file operations also snapshot the cache.
  void record_op(const OpRecord& r) {
    ops_.push_back(r);
    if (r.kind != OpKind::kCompute) {
      snapshots_.push_back(snapshot_cache(eng_.now(), mm_));
    }
  }

  void take_memory_sample() {
    profile_.push_back(sample_memory(eng_.now(), mm_));
  }

  const std::vector<MemorySample>& memory_profile() const { return profile_; }
  const std::vector<OpRecord>& ops() const { return ops_; }
  const std::vector<CacheSnapshot>& cache_snapshots() const {
    return snapshots_;
  }

  void write_memory_csv(const std::string& path) const {
    metrics::write_memory_csv(path, profile_);
  }
  void write_ops_csv(const std::string& path) const {
    metrics::write_ops_csv(path, ops_);
  }
  void write_snapshots_csv(const std::string& path) const {
    metrics::write_snapshots_csv(path, snapshots_);
  }

 private:
  sim::Task<void> cadence_loop(double dt) {
    for (;;) {
      take_memory_sample();
      co_await eng_.sleep(dt);
    }
  }

  sim::Engine& eng_;
  const cache::MemoryManager* mm_;
  std::vector<MemorySample> profile_;
  std::vector<OpRecord> ops_;
  std::vector<CacheSnapshot> snapshots_;
};

}  // namespace pagesim::metrics
