#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "pagesim/cache/memory_manager.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/metrics/recorder.hpp"
#include "pagesim/scenario/scenario.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/storage/device.hpp"
#include "pagesim/workload/runner.hpp"

namespace pagesim::scenario {

// Command-line overrides; unset fields keep the scenario's values.
struct RunOptions {
  std::optional<bool> page_cache;
  std::optional<cache::WritePolicy> write_policy;
  std::optional<double> cadence;
  std::optional<int> instances;
  std::optional<std::string> output_directory;
};

inline Scenario apply_overrides(Scenario s, const RunOptions& o) {
  if (o.page_cache) s.simulation.page_cache = *o.page_cache;
  if (o.write_policy) {
    for (HostSpec& h : s.platform.hosts) {
      if (h.cache) h.cache->write_policy = *o.write_policy;
    }
  }
  if (o.cadence) s.simulation.cadence = *o.cadence;
  if (o.instances) s.workload.instances = *o.instances;
  if (o.output_directory) s.output.directory = *o.output_directory;
  return s;
}

struct DeviceStat {
  std::string name;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
};

struct LinkStat {
  std::string name;
  std::uint64_t bytes_moved = 0;
};

struct CacheStat {
  std::string host;
  std::uint64_t cached = 0;
  std::uint64_t dirty = 0;
  std::uint64_t free_mem = 0;
  std::uint64_t anonymous = 0;
};

// Everything a finished run exposes. All values are deterministic functions
// of the scenario, so exports built from this are byte-identical across runs.
struct RunResult {
  std::string scenario;
  bool page_cache = false;
  std::string write_policy;  // policy of the cache serving the workload
  int instances = 1;
  sim::SimTime end_time = 0;
  std::vector<metrics::MemorySample> memory_profile;
  std::vector<metrics::OpRecord> ops;
  std::vector<metrics::CacheSnapshot> cache_snapshots;
  std::vector<DeviceStat> devices;
  std::vector<LinkStat> links;
  std::vector<CacheStat> caches;
};

namespace detail {

inline std::string describe_state(
    const sim::Engine& eng, const cache::MemoryManager* mm,
    const std::deque<storage::StorageDevice>& devices) {
  std::ostringstream out;
  out << "t=" << metrics::fmt_time(eng.now());
  if (mm != nullptr) {
    out << " cached=" << mm->cached() << " dirty=" << mm->dirty()
        << " free=" << mm->free_mem() << " anonymous=" << mm->anonymous();
  }
  for (const storage::StorageDevice& d : devices) {
    out << "; " << d.name() << " read=" << d.bytes_read()
        << " written=" << d.bytes_written();
  }
  return out.str();
}

}  // namespace detail

// Builds the platform, runs every instance to completion, and collects the
// observables. Validates first; ConfigError for bad scenarios, SimError out
// of the run itself (with `failure_dump`, when given, set to a state
// snapshot taken at the failure).
inline RunResult run_scenario(const Scenario& s,
                              std::string* failure_dump = nullptr) {
  validate(s);

  sim::Engine eng;
  std::deque<storage::StorageDevice> devices;
  std::deque<storage::NetworkLink> links;
  std::deque<cache::MemoryManager> managers;
  std::map<std::string, storage::StorageDevice*> disk_at;  // "host/disk"
  std::map<std::string, cache::MemoryManager*> cache_at;   // host
  std::map<std::string, storage::NetworkLink*> link_at;

  for (const HostSpec& h : s.platform.hosts) {
    for (const DiskSpec& d : h.disks) {
      devices.emplace_back(eng, h.name + ":" + d.name, d.capacity, d.read_bw,
                           d.write_bw, d.latency);
      disk_at[h.name + "/" + d.name] = &devices.back();
    }
    if (s.simulation.page_cache && h.cache) {
      devices.emplace_back(eng, h.name + ":mem", h.total_mem, h.memory_bw,
                           h.memory_bw);
      storage::StorageDevice& mem = devices.back();
      const CacheSpec& c = *h.cache;
      managers.emplace_back(
          eng,
          cache::CacheConfig{h.total_mem, c.dirty_ratio, c.expire_time,
                             c.flush_interval, c.write_policy},
          mem, *disk_at.at(h.name + "/" + h.disks[0].name));
      cache_at[h.name] = &managers.back();
    }
  }
  for (const LinkSpec& l : s.platform.links) {
    links.emplace_back(eng, l.name, l.bandwidth, l.latency);
    link_at[l.name] = &links.back();
  }

  const WorkloadSpec& w = s.workload;
  workload::StorageBinding binding;
  binding.chunk_size = w.chunk_size;
  cache::MemoryManager* observed_mm = nullptr;
  if (!w.disk.empty()) {
    binding.disk = disk_at.at(w.host + "/" + w.disk);
    auto it = cache_at.find(w.host);
    binding.mm = it == cache_at.end() ? nullptr : it->second;
    observed_mm = binding.mm;
  } else {
    const MountSpec& m = *find_mount(s, w.mount);
    binding.disk = disk_at.at(m.server + "/" + m.disk);
    binding.link = link_at.at(m.link);
    auto it = cache_at.find(m.server);
    binding.server_mm = it == cache_at.end() ? nullptr : it->second;
    observed_mm = binding.server_mm;
  }

  metrics::Recorder recorder(eng, observed_mm);
  if (observed_mm != nullptr) recorder.attach(*observed_mm);

  // Daemons before instances, so ties at t=0 resolve flush, sample, run.
  for (const auto& [host, mm] : cache_at) {
    eng.spawn_daemon(host + ":flush", mm->periodic_flush_process());
  }
  if (s.simulation.cadence > 0) {
    eng.spawn_daemon("sampler", recorder.cadence_process(s.simulation.cadence));
  } else if (observed_mm != nullptr) {
    recorder.take_memory_sample();  // t=0 baseline
  }

  // Inputs no pipeline task produces must exist before the run starts.
  std::set<std::string> produced;
  std::set<std::string> seen;
  std::vector<workload::FileParam> initial;
  for (const workload::TaskSpec& t : w.pipeline) {
    for (const workload::FileParam& f : t.inputs) {
      if (produced.count(f.file) == 0 && seen.insert(f.file).second) {
        initial.push_back(f);
      }
    }
    for (const workload::FileParam& f : t.outputs) produced.insert(f.file);
  }
  for (int k = 0; k < w.instances; ++k) {
    const std::string suffix =
        w.instances > 1 ? ".i" + std::to_string(k) : "";
    for (const workload::FileParam& f : initial) {
      binding.disk->register_file(f.file + suffix, f.bytes);
    }
  }

  workload::WorkloadRunner runner(
      eng, binding,
      [&recorder](const metrics::OpRecord& r) { recorder.record_op(r); });
  runner.spawn_instances(workload::PipelineSpec{w.pipeline,
                                                w.release_anon_after_task},
                         w.instances);

  try {
    eng.run_until_idle();
  } catch (const SimError&) {
    if (failure_dump != nullptr) {
      *failure_dump = detail::describe_state(eng, observed_mm, devices);
    }
    throw;
  }

  RunResult r;
  r.scenario = s.name;
  r.page_cache = s.simulation.page_cache;
  r.write_policy =
      observed_mm == nullptr
          ? "none"
          : (observed_mm->config().write_policy ==
                     cache::WritePolicy::kWriteback
                 ? "writeback"
                 : "writethrough");
  r.instances = w.instances;
  r.end_time = eng.now();
  r.memory_profile = recorder.memory_profile();
  r.ops = recorder.ops();
  r.cache_snapshots = recorder.cache_snapshots();
  for (const storage::StorageDevice& d : devices) {
    r.devices.push_back({d.name(), d.bytes_read(), d.bytes_written()});
  }
  for (const storage::NetworkLink& l : links) {
    r.links.push_back({l.name(), l.bytes_moved()});
  }
  for (const auto& [host, mm] : cache_at) {
    r.caches.push_back(
        {host, mm->cached(), mm->dirty(), mm->free_mem(), mm->anonymous()});
  }
  return r;
}

// Deterministic by construction: no wall-clock or environment data goes in.
inline nlohmann::ordered_json summary_json(const RunResult& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["page_cache"] = r.page_cache;
  j["write_policy"] = r.write_policy;
  j["instances"] = r.instances;
  j["simulated_time"] = r.end_time;
  auto phases = nlohmann::ordered_json::array();
  for (const metrics::OpRecord& op : r.ops) {
    phases.push_back({{"instance", op.instance},
                      {"task", op.task},
                      {"kind", metrics::label(op.kind)},
                      {"file", op.file},
                      {"start", op.start},
                      {"end", op.end},
                      {"duration", op.end - op.start}});
  }
  j["phases"] = phases;
  auto devices = nlohmann::ordered_json::array();
  for (const DeviceStat& d : r.devices) {
    devices.push_back({{"name", d.name},
                       {"bytes_read", d.bytes_read},
                       {"bytes_written", d.bytes_written}});
  }
  j["devices"] = devices;
  auto links = nlohmann::ordered_json::array();
  for (const LinkStat& l : r.links) {
    links.push_back({{"name", l.name}, {"bytes_moved", l.bytes_moved}});
  }
  j["links"] = links;
  auto caches = nlohmann::ordered_json::array();
  for (const CacheStat& c : r.caches) {
    caches.push_back({{"host", c.host},
                      {"cached", c.cached},
                      {"dirty", c.dirty},
                      {"free", c.free_mem},
                      {"anonymous", c.anonymous}});
  }
  j["caches"] = caches;
  return j;
}

inline void write_exports(const RunResult& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + dir + "': " +
                      ec.message());
  }
  metrics::write_memory_csv(dir + "/memory_profile.csv", r.memory_profile);
  metrics::write_ops_csv(dir + "/ops.csv", r.ops);
  metrics::write_snapshots_csv(dir + "/cache_snapshots.csv",
                               r.cache_snapshots);
  std::ofstream out = metrics::open_output(dir + "/summary.json");
  out << summary_json(r).dump(2) << '\n';
}

}  // namespace pagesim::scenario
