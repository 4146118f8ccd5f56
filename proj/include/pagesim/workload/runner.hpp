#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pagesim/cache/memory_manager.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/io/controller.hpp"
#include "pagesim/metrics/records.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/sim/task.hpp"
#include "pagesim/storage/device.hpp"

namespace pagesim::workload {

struct FileParam {
  std::string file;
  std::uint64_t bytes = 0;
};

// One application step: read all inputs, compute, write all outputs.
struct TaskSpec {
  std::string name;
  std::vector<FileParam> inputs;
  std::vector<FileParam> outputs;
  double cpu_time = 0;
};

// Tasks run in order within one application instance. Anonymous memory held
// by a task's reads is released when the task ends unless the flag is off.
struct PipelineSpec {
  std::vector<TaskSpec> tasks;
  bool release_anon_after_task = true;
};

// Where an instance's files live and how they are reached.
//
// Local storage: `disk` is the home device, `mm` its host's page cache
// (null runs without one). Remote storage: `link` is set, `disk` is the
// server's disk and `server_mm` the server's page cache (null for a raw
// server); the client side is cacheless, so `mm` must stay null.
struct StorageBinding {
  cache::MemoryManager* mm = nullptr;
  storage::StorageDevice* disk = nullptr;
  storage::NetworkLink* link = nullptr;
  cache::MemoryManager* server_mm = nullptr;
  std::uint64_t chunk_size = 1'000'000;
};

// Runs application pipelines against one storage binding. Each instance is
// one engine process; instances share the binding's cache and devices.
class WorkloadRunner {
 public:
  WorkloadRunner(sim::Engine& eng, StorageBinding binding,
                 metrics::OpSink sink = {})
      : eng_(eng),
        binding_(binding),
        io_(eng, binding.mm),
        server_io_(eng, binding.server_mm),
        sink_(std::move(sink)) {
    if (binding_.disk == nullptr) {
      throw ConfigError("storage binding needs a disk");
    }
    if (binding_.chunk_size == 0) {
      throw ConfigError("chunk size must be positive");
    }
    if (binding_.link != nullptr && binding_.mm != nullptr) {
      throw ConfigError("remote storage does not use a client-side cache");
    }
    if (binding_.link == nullptr && binding_.server_mm != nullptr) {
      throw ConfigError("a server cache needs a network link");
    }
    if (binding_.server_mm != nullptr &&
        binding_.server_mm->config().write_policy !=
            cache::WritePolicy::kWritethrough) {
      throw ConfigError("the server cache must be writethrough");
    }
  }

  // Validates `p` and spawns `count` copies of it, started together at the
  // current time. With count > 1 every file name gets a per-instance suffix
  // so instances operate on disjoint files.
  void spawn_instances(const PipelineSpec& p, int count) {
    if (count < 1) throw ConfigError("instance count must be at least 1");
    for (int k = 0; k < count; ++k) {
      const std::string instance = "i" + std::to_string(k);
      PipelineSpec copy = p;
      if (count > 1) {
        for (TaskSpec& t : copy.tasks) {
          for (FileParam& f : t.inputs) f.file += "." + instance;
          for (FileParam& f : t.outputs) f.file += "." + instance;
        }
      }
      validate(copy);
      eng_.spawn(instance, run_instance(std::move(copy), instance));
    }
  }

  // Executes one already-validated pipeline sequentially.
  sim::Task<void> run_instance(PipelineSpec p, std::string instance) {
    for (const TaskSpec& t : p.tasks) {
      co_await run_task(t, instance, p.release_anon_after_task);
    }
  }

 private:
  io::FileHandle handle(const FileParam& f) const {
    return {f.file, f.bytes, std::min(binding_.chunk_size, f.bytes),
            binding_.disk};
  }

  void emit(const std::string& instance, const std::string& task,
            metrics::OpKind kind, const std::string& file, sim::SimTime start) {
    if (sink_) sink_({instance, task, kind, file, start, eng_.now()});
  }

  sim::Task<void> run_task(TaskSpec t, std::string instance, bool release) {
    std::uint64_t anon_held = 0;
    for (const FileParam& f : t.inputs) {
      const sim::SimTime start = eng_.now();
      if (binding_.link != nullptr) {
        co_await remote_read_file(handle(f));
      } else {
        co_await io_.read_file(handle(f));
        if (binding_.mm != nullptr) anon_held += f.bytes;
      }
      emit(instance, t.name, metrics::OpKind::kRead, f.file, start);
    }
    const sim::SimTime start = eng_.now();
    if (t.cpu_time > 0) co_await eng_.sleep(t.cpu_time);
    emit(instance, t.name, metrics::OpKind::kCompute, "", start);
    for (const FileParam& f : t.outputs) {
      const sim::SimTime wstart = eng_.now();
      if (binding_.link != nullptr) {
        co_await remote_write_file(handle(f));
      } else {
        co_await io_.write_file(handle(f));
      }
      emit(instance, t.name, metrics::OpKind::kWrite, f.file, wstart);
    }
    if (release && anon_held > 0) {
      binding_.mm->release_anonymous_mem(anon_held);
    }
  }

  // Server-side read, then the chunk crosses the link; no client cache, so
  // the two stages serialize per chunk. The server keeps no anonymous copy.
  sim::Task<void> remote_read_file(io::FileHandle f) {
    std::uint64_t offset = 0;
    while (offset < f.size) {
      const std::uint64_t chunk = std::min(f.chunk_size, f.size - offset);
      co_await server_io_.read_chunk(f, chunk, false);
      co_await binding_.link->transfer(chunk);
      offset += chunk;
    }
  }

  // The chunk crosses the link, then the server persists it; with a server
  // cache the write is writethrough (disk-bound, clean copy kept).
  sim::Task<void> remote_write_file(io::FileHandle f) {
    f.home->create_file(f.name);
    std::uint64_t offset = 0;
    while (offset < f.size) {
      const std::uint64_t chunk = std::min(f.chunk_size, f.size - offset);
      co_await binding_.link->transfer(chunk);
      if (binding_.server_mm != nullptr) {
        co_await server_io_.write_chunk_writethrough(f, chunk);
      } else {
        co_await f.home->write(chunk);
        f.home->grow_file(f.name, chunk);
      }
      offset += chunk;
    }
  }

  // Static pipeline checks plus dataflow against the binding: every input is
  // produced earlier in the pipeline (with matching size) or already exists;
  // outputs are write-once.
  void validate(const PipelineSpec& p) const {
    if (p.tasks.empty()) throw ConfigError("pipeline has no tasks");
    std::map<std::string, std::uint64_t> produced;
    for (const TaskSpec& t : p.tasks) {
      if (t.name.empty()) throw ConfigError("task without a name");
      if (t.cpu_time < 0) {
        throw ConfigError("task '" + t.name + "' has negative cpu time");
      }
      for (const FileParam& f : t.inputs) {
        if (f.bytes == 0) {
          throw ConfigError("input '" + f.file + "' of task '" + t.name +
                            "' has zero size");
        }
        auto it = produced.find(f.file);
        if (it != produced.end()) {
          if (it->second != f.bytes) {
            throw ConfigError("task '" + t.name + "' expects " +
                              std::to_string(f.bytes) + " bytes of '" +
                              f.file + "' but the pipeline produces " +
                              std::to_string(it->second));
          }
        } else if (!binding_.disk->has_file(f.file) &&
                   (binding_.mm == nullptr ||
                    binding_.mm->cached(f.file) == 0)) {
          throw ConfigError("input '" + f.file + "' of task '" + t.name +
                            "' is neither produced nor present");
        }
      }
      for (const FileParam& f : t.outputs) {
        if (f.bytes == 0) {
          throw ConfigError("output '" + f.file + "' of task '" + t.name +
                            "' has zero size");
        }
        if (produced.count(f.file) || binding_.disk->has_file(f.file) ||
            (binding_.mm != nullptr && binding_.mm->cached(f.file) > 0)) {
          throw ConfigError("output '" + f.file + "' already exists");
        }
        produced[f.file] = f.bytes;
      }
    }
  }

  sim::Engine& eng_;
  StorageBinding binding_;
  io::IoController io_;
  io::IoController server_io_;
  metrics::OpSink sink_;
};

}  // namespace pagesim::workload
