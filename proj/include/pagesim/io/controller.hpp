#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "pagesim/cache/memory_manager.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/sim/task.hpp"
#include "pagesim/storage/device.hpp"

namespace pagesim::io {

// A file as the applications see it: a name, a total size, the chunk size
// its reader/writer uses, and the device it lives on. 0 < chunk_size <= size.
struct FileHandle {
  std::string name;
  std::uint64_t size = 0;
  std::uint64_t chunk_size = 0;
  storage::StorageDevice* home = nullptr;
};

// Entry point for application I/O. Translates chunked file reads and writes
// into memory-manager and device operations. With a null MemoryManager the
// controller bypasses the cache entirely: reads and writes go straight to
// the home device at its bandwidth.
//
// All timed operations are coroutines; elapsed simulated time is returned.
// Re-entrant across processes: state lives in the memory manager and the
// devices, never in the controller.
class IoController {
 public:
  IoController(sim::Engine& eng, cache::MemoryManager* mm)
      : eng_(eng), mm_(mm) {}

  bool cached_mode() const { return mm_ != nullptr; }

  // Reads one chunk of `f`. Uncached bytes come from the home device and are
  // added to the cache; cached bytes are served at memory speed. The chunk
  // ends up in the application's anonymous memory unless `account_anon` is
  // false (a server process reading on behalf of a remote client keeps no
  // copy after the response is sent).
  //
  // Memory is obtained by flushing and evicting cached blocks, sparing this
  // file's own blocks until evicting everything else still leaves the chunk
  // short; out of memory is raised only when even unrestricted flush+evict
  // rounds stop freeing memory.
  sim::Task<sim::SimTime> read_chunk(FileHandle f, std::uint64_t chunk,
                                     bool account_anon = true) {
    validate(f);
    if (chunk == 0) co_return 0.0;
    const sim::SimTime t0 = eng_.now();
    if (mm_ == nullptr) {
      require_on_disk(f);
      co_await f.home->read(chunk);
      co_return eng_.now() - t0;
    }
    if (!f.home->has_file(f.name) && mm_->cached(f.name) == 0) {
      throw ContractViolation("read of unknown file '" + f.name + "'");
    }
    const std::uint64_t cached = mm_->cached(f.name);
    const std::uint64_t uncached = f.size > cached ? f.size - cached : 0;
    const std::uint64_t disk_read = std::min(chunk, uncached);
    const std::uint64_t cache_read = chunk - disk_read;
    const std::uint64_t anon_part = account_anon ? chunk : 0;
    co_await reserve(disk_read + anon_part, f.name);
    if (disk_read > 0) {
      co_await f.home->read(disk_read);
      co_await reserve(disk_read + anon_part, f.name);
      mm_->add_to_cache(f.name, disk_read);
    }
    if (cache_read > 0) {
      // A reserve above may have sacrificed bytes this chunk counted on
      // reading from cache; those come back from disk and are dropped
      // immediately under the same pressure.
      const std::uint64_t hit = std::min(cache_read, mm_->cached(f.name));
      if (cache_read > hit) co_await f.home->read(cache_read - hit);
      if (hit > 0) co_await mm_->cache_read(f.name, hit);
    }
    if (account_anon) {
      co_await reserve(chunk, f.name);
      mm_->use_anonymous_mem(chunk);
    }
    co_return eng_.now() - t0;
  }

  // Writes one chunk of `f` through the cache (writeback). While the dirty
  // ratio allows it the write lands in memory as dirty blocks; once dirty
  // data hits the bound the chunk waits on flushes and proceeds at disk
  // speed. Bytes stay dirty until a flush; the disk footprint grows then.
  sim::Task<sim::SimTime> write_chunk(FileHandle f, std::uint64_t chunk) {
    validate(f);
    require_cache("write_chunk");
    if (chunk == 0) co_return 0.0;
    const sim::SimTime t0 = eng_.now();
    const double cs = static_cast<double>(chunk);
    const double remain_dirty =
        mm_->config().dirty_ratio * static_cast<double>(mm_->avail_mem()) -
        static_cast<double>(mm_->dirty());
    std::uint64_t mem_amt = 0;
    if (remain_dirty >= 1.0) {
      mm_->evict(std::min(cs, remain_dirty) -
                     static_cast<double>(mm_->free_mem()),
                 nullptr);
      mem_amt = std::min(chunk, mm_->free_mem());
      co_await mm_->write_to_cache(f.name, mem_amt);
    }
    std::uint64_t remaining = chunk - mem_amt;
    const double refill = cs - static_cast<double>(mem_amt);
    int stalled = 0;
    while (remaining > 0) {
      co_await mm_->flush(refill);
      mm_->evict(refill - static_cast<double>(mm_->free_mem()), nullptr);
      const std::uint64_t to_cache = std::min(remaining, mm_->free_mem());
      if (to_cache == 0) {
        if (++stalled == 2) {
          throw StuckSimulationError(
              "chunk write to '" + f.name +
              "' cannot free memory (dirty data is stuck)");
        }
        continue;
      }
      stalled = 0;
      co_await mm_->write_to_cache(f.name, to_cache);
      remaining -= to_cache;
    }
    co_return eng_.now() - t0;
  }

  // Writes one chunk of `f` straight to the home device (writethrough), then
  // keeps a clean copy in the cache. The write is always full speed to disk;
  // if eviction cannot make room for the whole copy, only what fits is kept.
  sim::Task<sim::SimTime> write_chunk_writethrough(FileHandle f,
                                                   std::uint64_t chunk) {
    validate(f);
    require_cache("write_chunk_writethrough");
    if (chunk == 0) co_return 0.0;
    const sim::SimTime t0 = eng_.now();
    co_await f.home->write(chunk);
    f.home->grow_file(f.name, chunk);
    int stalled = 0;
    while (mm_->free_mem() < chunk) {
      const std::uint64_t freed = mm_->evict(
          static_cast<double>(chunk) - static_cast<double>(mm_->free_mem()),
          &f.name);
      if (freed == 0 && ++stalled == 2) break;
    }
    const std::uint64_t keep = std::min(chunk, mm_->free_mem());
    if (keep > 0) mm_->add_to_cache(f.name, keep);
    co_return eng_.now() - t0;
  }

  // Reads the whole file in chunk_size pieces (the last may be short).
  sim::Task<sim::SimTime> read_file(FileHandle f, bool account_anon = true) {
    validate(f);
    const sim::SimTime t0 = eng_.now();
    std::uint64_t offset = 0;
    while (offset < f.size) {
      const std::uint64_t chunk = std::min(f.chunk_size, f.size - offset);
      co_await read_chunk(f, chunk, account_anon);
      offset += chunk;
    }
    co_return eng_.now() - t0;
  }

  // Writes the whole file in chunk_size pieces, creating it on the home
  // device first. The write path follows the memory manager's policy;
  // without a cache every chunk is a plain device write.
  sim::Task<sim::SimTime> write_file(FileHandle f) {
    validate(f);
    const sim::SimTime t0 = eng_.now();
    f.home->create_file(f.name);
    std::uint64_t offset = 0;
    while (offset < f.size) {
      const std::uint64_t chunk = std::min(f.chunk_size, f.size - offset);
      if (mm_ == nullptr) {
        co_await f.home->write(chunk);
        f.home->grow_file(f.name, chunk);
      } else if (mm_->config().write_policy ==
                 cache::WritePolicy::kWritethrough) {
        co_await write_chunk_writethrough(f, chunk);
      } else {
        co_await write_chunk(f, chunk);
      }
      offset += chunk;
    }
    co_return eng_.now() - t0;
  }

 private:
  static void validate(const FileHandle& f) {
    if (f.name.empty() || f.home == nullptr) {
      throw ContractViolation("file handle needs a name and a home device");
    }
    if (f.chunk_size == 0 || f.chunk_size > f.size) {
      throw ContractViolation("chunk size of '" + f.name +
                              "' must be in (0, file size]");
    }
  }

  void require_cache(const char* op) const {
    if (mm_ == nullptr) {
      throw ContractViolation(std::string(op) + " needs a page cache");
    }
  }

  void require_on_disk(const FileHandle& f) const {
    if (!f.home->has_file(f.name)) {
      throw ContractViolation("read of unknown file '" + f.name + "'");
    }
  }

  // Ensures free_mem >= needed. Flush+evict rounds spare `file`'s own
  // blocks; when a sparing round changes neither free nor dirty memory the
  // exclusion is lifted and the file's cold blocks become fair game (lost
  // bytes are re-read later). Out-of-memory is raised only when an
  // unrestricted round makes no progress either.
  sim::Task<void> reserve(std::uint64_t needed, const std::string& file) {
    bool spare_self = true;
    for (;;) {
      const std::uint64_t free = mm_->free_mem();
      if (free >= needed) co_return;
      const std::uint64_t dirty = mm_->dirty();
      const std::string* exclude = spare_self ? &file : nullptr;
      const double shortfall =
          static_cast<double>(needed) - static_cast<double>(free);
      co_await mm_->flush(shortfall - static_cast<double>(mm_->evictable()),
                          exclude);
      mm_->evict(static_cast<double>(needed) -
                     static_cast<double>(mm_->free_mem()),
                 exclude);
      if (mm_->free_mem() == free && mm_->dirty() == dirty) {
        if (!spare_self) {
          throw OutOfMemoryError("cannot reserve " + std::to_string(needed) +
                                 " bytes for '" + file + "'");
        }
        spare_self = false;
      }
    }
  }

  sim::Engine& eng_;
  cache::MemoryManager* mm_;
};

}  // namespace pagesim::io
