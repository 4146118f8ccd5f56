#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pagesim/cache/memory_manager.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/workload/runner.hpp"

namespace pagesim::scenario {

// Scenario schema, version 1. A scenario is a JSON document:
//
//   {
//     "version": 1,
//     "platform": {
//       "hosts":  [{name, total_mem, memory_bw, disks: [...], cache?}],
//       "links":  [{name, bandwidth, latency?}],
//       "mounts": [{name, server, disk, link}]
//     },
//     "workload": {chunk_size?, instances?, host, disk | mount,
//                  release_anon_after_task?, pipeline: [...]},
//     "simulation": {page_cache?, cadence?},
//     "output": {directory?}
//   }
//
// Disks take either a symmetric "bw" or explicit "read_bw"/"write_bw".
// A host with a "cache" block runs a page cache over its single disk;
// "simulation.page_cache": false disables every cache for the run.

struct DiskSpec {
  std::string name;
  std::uint64_t capacity = 0;
  double read_bw = 0;
  double write_bw = 0;
  double latency = 0;
};

struct CacheSpec {
  double dirty_ratio = 0.2;
  double expire_time = 30.0;
  double flush_interval = 5.0;
  cache::WritePolicy write_policy = cache::WritePolicy::kWriteback;
};

struct HostSpec {
  std::string name;
  std::uint64_t total_mem = 0;
  double memory_bw = 0;
  std::vector<DiskSpec> disks;
  std::optional<CacheSpec> cache;
};

struct LinkSpec {
  std::string name;
  double bandwidth = 0;
  double latency = 0;
};

// An NFS-style export: the named disk on `server`, reached over `link`.
// The binding host accesses it cachelessly; caching happens server-side.
struct MountSpec {
  std::string name;
  std::string server;
  std::string disk;
  std::string link;
};

struct PlatformSpec {
  std::vector<HostSpec> hosts;
  std::vector<LinkSpec> links;
  std::vector<MountSpec> mounts;
};

struct WorkloadSpec {
  std::uint64_t chunk_size = 1'000'000;
  int instances = 1;
  std::string host;
  std::string disk;   // exactly one of disk/mount is set
  std::string mount;
  bool release_anon_after_task = true;
  std::vector<workload::TaskSpec> pipeline;
};

struct SimulationSpec {
  bool page_cache = true;
  double cadence = 0;  // seconds between profile samples; 0 disables
};

struct OutputSpec {
  std::string directory = "out";
};

struct Scenario {
  int version = 1;
  std::string name;
  PlatformSpec platform;
  WorkloadSpec workload;
  SimulationSpec simulation;
  OutputSpec output;
};

namespace detail {

using nlohmann::json;

inline const json& need(const json& j, const std::string& where,
                        const std::string& key) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

inline void reject_unknown(const json& j, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

inline std::string str_field(const json& j, const std::string& where,
                             const std::string& key) {
  const json& v = need(j, where, key);
  if (!v.is_string()) {
    throw ConfigError(where + ": '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline double num_field(const json& j, const std::string& where,
                        const std::string& key) {
  const json& v = need(j, where, key);
  if (!v.is_number()) {
    throw ConfigError(where + ": '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline double num_field_or(const json& j, const std::string& where,
                           const std::string& key, double def) {
  if (!j.contains(key)) return def;
  return num_field(j, where, key);
}

inline bool bool_field_or(const json& j, const std::string& where,
                          const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) {
    throw ConfigError(where + ": '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

// Byte counts may be written as integers or in exponent notation (20e9).
inline std::uint64_t bytes_field(const json& j, const std::string& where,
                                 const std::string& key) {
  const json& v = need(j, where, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    auto n = v.get<std::int64_t>();
    if (n < 0) throw ConfigError(where + ": '" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(n);
  }
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (d < 0 || d > 9.2e18 || d != std::floor(d)) {
      throw ConfigError(where + ": '" + key +
                        "' must be a whole nonnegative byte count");
    }
    return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(where + ": '" + key + "' must be a number");
}

inline cache::WritePolicy policy_field(const json& j, const std::string& where,
                                       const std::string& key,
                                       cache::WritePolicy def) {
  if (!j.contains(key)) return def;
  std::string s = str_field(j, where, key);
  if (s == "writeback") return cache::WritePolicy::kWriteback;
  if (s == "writethrough") return cache::WritePolicy::kWritethrough;
  throw ConfigError(where + ": '" + key +
                    "' must be \"writeback\" or \"writethrough\"");
}

inline DiskSpec parse_disk(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"name", "capacity", "bw", "read_bw", "write_bw", "latency"});
  DiskSpec d;
  d.name = str_field(j, where, "name");
  d.capacity = bytes_field(j, where, "capacity");
  if (j.contains("bw") == (j.contains("read_bw") || j.contains("write_bw"))) {
    throw ConfigError(where + ": give either 'bw' or 'read_bw'/'write_bw'");
  }
  if (j.contains("bw")) {
    d.read_bw = d.write_bw = num_field(j, where, "bw");
  } else {
    d.read_bw = num_field(j, where, "read_bw");
    d.write_bw = num_field(j, where, "write_bw");
  }
  d.latency = num_field_or(j, where, "latency", 0);
  return d;
}

inline CacheSpec parse_cache(const json& j, const std::string& where) {
  reject_unknown(
      j, where,
      {"dirty_ratio", "expire_time", "flush_interval", "write_policy"});
  CacheSpec c;
  c.dirty_ratio = num_field_or(j, where, "dirty_ratio", c.dirty_ratio);
  c.expire_time = num_field_or(j, where, "expire_time", c.expire_time);
  c.flush_interval =
      num_field_or(j, where, "flush_interval", c.flush_interval);
  c.write_policy =
      policy_field(j, where, "write_policy", cache::WritePolicy::kWriteback);
  return c;
}

inline HostSpec parse_host(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"name", "total_mem", "memory_bw", "disks", "cache"});
  HostSpec h;
  h.name = str_field(j, where, "name");
  h.total_mem = bytes_field(j, where, "total_mem");
  h.memory_bw = num_field(j, where, "memory_bw");
  if (j.contains("disks")) {
    const json& arr = j.at("disks");
    if (!arr.is_array()) throw ConfigError(where + ": 'disks' must be a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      h.disks.push_back(
          parse_disk(arr[i], where + ".disks[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("cache")) {
    h.cache = parse_cache(j.at("cache"), where + ".cache");
  }
  return h;
}

inline std::vector<workload::FileParam> parse_files(const json& j,
                                                    const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of files");
  std::vector<workload::FileParam> files;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    reject_unknown(j[i], at, {"file", "bytes"});
    files.push_back(
        {str_field(j[i], at, "file"), bytes_field(j[i], at, "bytes")});
  }
  return files;
}

inline workload::TaskSpec parse_task(const json& j, const std::string& where) {
  reject_unknown(j, where, {"name", "inputs", "outputs", "cpu_time"});
  workload::TaskSpec t;
  t.name = str_field(j, where, "name");
  if (j.contains("inputs")) {
    t.inputs = parse_files(j.at("inputs"), where + ".inputs");
  }
  if (j.contains("outputs")) {
    t.outputs = parse_files(j.at("outputs"), where + ".outputs");
  }
  t.cpu_time = num_field_or(j, where, "cpu_time", 0);
  return t;
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& j) {
  using namespace detail;
  reject_unknown(j, "scenario",
                 {"version", "name", "platform", "workload", "simulation",
                  "output"});
  Scenario s;
  s.version = static_cast<int>(num_field(j, "scenario", "version"));
  if (j.contains("name")) s.name = str_field(j, "scenario", "name");

  const json& plat = need(j, "scenario", "platform");
  reject_unknown(plat, "platform", {"hosts", "links", "mounts"});
  const json& hosts = need(plat, "platform", "hosts");
  if (!hosts.is_array()) throw ConfigError("platform: 'hosts' must be a list");
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    s.platform.hosts.push_back(
        parse_host(hosts[i], "platform.hosts[" + std::to_string(i) + "]"));
  }
  if (plat.contains("links")) {
    const json& arr = plat.at("links");
    if (!arr.is_array()) throw ConfigError("platform: 'links' must be a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = "platform.links[" + std::to_string(i) + "]";
      reject_unknown(arr[i], at, {"name", "bandwidth", "latency"});
      s.platform.links.push_back({str_field(arr[i], at, "name"),
                                  num_field(arr[i], at, "bandwidth"),
                                  num_field_or(arr[i], at, "latency", 0)});
    }
  }
  if (plat.contains("mounts")) {
    const json& arr = plat.at("mounts");
    if (!arr.is_array()) throw ConfigError("platform: 'mounts' must be a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = "platform.mounts[" + std::to_string(i) + "]";
      reject_unknown(arr[i], at, {"name", "server", "disk", "link"});
      s.platform.mounts.push_back(
          {str_field(arr[i], at, "name"), str_field(arr[i], at, "server"),
           str_field(arr[i], at, "disk"), str_field(arr[i], at, "link")});
    }
  }

  const json& work = need(j, "scenario", "workload");
  reject_unknown(work, "workload",
                 {"chunk_size", "instances", "host", "disk", "mount",
                  "release_anon_after_task", "pipeline"});
  if (work.contains("chunk_size")) {
    s.workload.chunk_size = bytes_field(work, "workload", "chunk_size");
  }
  s.workload.instances =
      static_cast<int>(num_field_or(work, "workload", "instances", 1));
  s.workload.host = str_field(work, "workload", "host");
  if (work.contains("disk")) {
    s.workload.disk = str_field(work, "workload", "disk");
  }
  if (work.contains("mount")) {
    s.workload.mount = str_field(work, "workload", "mount");
  }
  s.workload.release_anon_after_task =
      bool_field_or(work, "workload", "release_anon_after_task", true);
  const json& pipe = need(work, "workload", "pipeline");
  if (!pipe.is_array()) {
    throw ConfigError("workload: 'pipeline' must be a list of tasks");
  }
  for (std::size_t i = 0; i < pipe.size(); ++i) {
    s.workload.pipeline.push_back(
        parse_task(pipe[i], "workload.pipeline[" + std::to_string(i) + "]"));
  }

  if (j.contains("simulation")) {
    const json& sim = j.at("simulation");
    reject_unknown(sim, "simulation", {"page_cache", "cadence"});
    s.simulation.page_cache =
        bool_field_or(sim, "simulation", "page_cache", true);
    s.simulation.cadence = num_field_or(sim, "simulation", "cadence", 0);
  }
  if (j.contains("output")) {
    const json& out = j.at("output");
    reject_unknown(out, "output", {"directory"});
    if (out.contains("directory")) {
      s.output.directory = str_field(out, "output", "directory");
    }
  }
  return s;
}

inline const HostSpec* find_host(const Scenario& s, const std::string& name) {
  for (const HostSpec& h : s.platform.hosts) {
    if (h.name == name) return &h;
  }
  return nullptr;
}

inline const DiskSpec* find_disk(const HostSpec& h, const std::string& name) {
  for (const DiskSpec& d : h.disks) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

inline const MountSpec* find_mount(const Scenario& s,
                                   const std::string& name) {
  for (const MountSpec& m : s.platform.mounts) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

inline const LinkSpec* find_link(const Scenario& s, const std::string& name) {
  for (const LinkSpec& l : s.platform.links) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

// Semantic checks beyond JSON shape. Throws ConfigError on the first
// violation; parse_scenario must have succeeded already.
inline void validate(const Scenario& s) {
  if (s.version != 1) {
    throw ConfigError("unsupported scenario version " +
                      std::to_string(s.version) + " (this build reads 1)");
  }
  if (s.platform.hosts.empty()) {
    throw ConfigError("platform needs at least one host");
  }
  std::set<std::string> host_names;
  for (const HostSpec& h : s.platform.hosts) {
    if (h.name.empty()) throw ConfigError("hosts need nonempty names");
    if (!host_names.insert(h.name).second) {
      throw ConfigError("duplicate host '" + h.name + "'");
    }
    if (h.total_mem == 0) {
      throw ConfigError("host '" + h.name + "': total_mem must be positive");
    }
    if (!(h.memory_bw > 0)) {
      throw ConfigError("host '" + h.name + "': memory_bw must be positive");
    }
    std::set<std::string> disk_names;
    for (const DiskSpec& d : h.disks) {
      if (d.name.empty()) {
        throw ConfigError("host '" + h.name + "': disks need nonempty names");
      }
      if (!disk_names.insert(d.name).second) {
        throw ConfigError("host '" + h.name + "': duplicate disk '" + d.name +
                          "'");
      }
      if (d.capacity == 0) {
        throw ConfigError("disk '" + d.name + "': capacity must be positive");
      }
      if (!(d.read_bw > 0) || !(d.write_bw > 0)) {
        throw ConfigError("disk '" + d.name + "': bandwidth must be positive");
      }
      if (d.latency < 0) {
        throw ConfigError("disk '" + d.name + "': latency must be >= 0");
      }
    }
    if (h.cache) {
      if (!(h.cache->dirty_ratio > 0 && h.cache->dirty_ratio < 1)) {
        throw ConfigError("host '" + h.name +
                          "': dirty_ratio must be in (0, 1)");
      }
      if (!(h.cache->expire_time > 0) || !(h.cache->flush_interval > 0)) {
        throw ConfigError("host '" + h.name +
                          "': expire_time and flush_interval must be "
                          "positive");
      }
      if (h.disks.size() != 1) {
        throw ConfigError("host '" + h.name +
                          "': a page cache needs exactly one backing disk");
      }
    }
  }

  std::set<std::string> link_names;
  for (const LinkSpec& l : s.platform.links) {
    if (l.name.empty()) throw ConfigError("links need nonempty names");
    if (!link_names.insert(l.name).second) {
      throw ConfigError("duplicate link '" + l.name + "'");
    }
    if (!(l.bandwidth > 0)) {
      throw ConfigError("link '" + l.name + "': bandwidth must be positive");
    }
    if (l.latency < 0) {
      throw ConfigError("link '" + l.name + "': latency must be >= 0");
    }
  }

  std::set<std::string> mount_names;
  for (const MountSpec& m : s.platform.mounts) {
    if (m.name.empty()) throw ConfigError("mounts need nonempty names");
    if (!mount_names.insert(m.name).second) {
      throw ConfigError("duplicate mount '" + m.name + "'");
    }
    const HostSpec* server = find_host(s, m.server);
    if (server == nullptr) {
      throw ConfigError("mount '" + m.name + "': unknown server '" +
                        m.server + "'");
    }
    if (find_disk(*server, m.disk) == nullptr) {
      throw ConfigError("mount '" + m.name + "': no disk '" + m.disk +
                        "' on host '" + m.server + "'");
    }
    if (find_link(s, m.link) == nullptr) {
      throw ConfigError("mount '" + m.name + "': unknown link '" + m.link +
                        "'");
    }
    if (server->cache &&
        server->cache->write_policy != cache::WritePolicy::kWritethrough) {
      throw ConfigError("mount '" + m.name +
                        "': the server cache must be writethrough");
    }
  }

  const WorkloadSpec& w = s.workload;
  const HostSpec* host = find_host(s, w.host);
  if (host == nullptr) {
    throw ConfigError("workload: unknown host '" + w.host + "'");
  }
  if (w.disk.empty() == w.mount.empty()) {
    throw ConfigError("workload: bind to exactly one of disk or mount");
  }
  if (!w.disk.empty() && find_disk(*host, w.disk) == nullptr) {
    throw ConfigError("workload: no disk '" + w.disk + "' on host '" +
                      w.host + "'");
  }
  if (!w.mount.empty() && find_mount(s, w.mount) == nullptr) {
    throw ConfigError("workload: unknown mount '" + w.mount + "'");
  }
  if (w.chunk_size == 0) {
    throw ConfigError("workload: chunk_size must be positive");
  }
  if (w.instances < 1) {
    throw ConfigError("workload: instances must be >= 1");
  }
  if (w.pipeline.empty()) {
    throw ConfigError("workload: pipeline must not be empty");
  }

  // Reads pin their bytes as anonymous memory for the task's lifetime, so
  // a cached read of a file larger than memory can never complete.
  const bool cached_reads =
      s.simulation.page_cache && !w.disk.empty() && host->cache.has_value();
  std::set<std::string> produced;
  for (const workload::TaskSpec& t : w.pipeline) {
    if (t.name.empty()) {
      throw ConfigError("workload: tasks need nonempty names");
    }
    if (t.cpu_time < 0) {
      throw ConfigError("task '" + t.name + "': cpu_time must be >= 0");
    }
    for (const workload::FileParam& f : t.inputs) {
      if (f.bytes == 0) {
        throw ConfigError("task '" + t.name + "': input '" + f.file +
                          "' must have positive bytes");
      }
      if (w.chunk_size > f.bytes) {
        throw ConfigError("task '" + t.name + "': chunk_size " +
                          std::to_string(w.chunk_size) + " exceeds file '" +
                          f.file + "' (" + std::to_string(f.bytes) +
                          " bytes)");
      }
      if (cached_reads && f.bytes > host->total_mem) {
        throw ConfigError("task '" + t.name + "': input '" + f.file +
                          "' does not fit in host memory");
      }
    }
    for (const workload::FileParam& f : t.outputs) {
      if (f.bytes == 0) {
        throw ConfigError("task '" + t.name + "': output '" + f.file +
                          "' must have positive bytes");
      }
      if (w.chunk_size > f.bytes) {
        throw ConfigError("task '" + t.name + "': chunk_size " +
                          std::to_string(w.chunk_size) + " exceeds file '" +
                          f.file + "' (" + std::to_string(f.bytes) +
                          " bytes)");
      }
      if (!produced.insert(f.file).second) {
        throw ConfigError("task '" + t.name + "': output '" + f.file +
                          "' is written twice");
      }
    }
  }

  if (s.simulation.cadence < 0) {
    throw ConfigError("simulation: cadence must be >= 0");
  }
  if (s.output.directory.empty()) {
    throw ConfigError("output: directory must be nonempty");
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
  Scenario s = parse_scenario(j);
  if (s.name.empty()) {
    s.name = std::filesystem::path(path).stem().string();
  }
  return s;
}

}  // namespace pagesim::scenario
