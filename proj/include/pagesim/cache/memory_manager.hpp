#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pagesim/cache/block_list.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/sim/task.hpp"
#include "pagesim/storage/device.hpp"

namespace pagesim::cache {

enum class WritePolicy { kWriteback, kWritethrough };

struct CacheConfig {
  std::uint64_t total_mem = 0;
  double dirty_ratio = 0.2;
  double expire_time = 30.0;
  double flush_interval = 5.0;
  WritePolicy write_policy = WritePolicy::kWriteback;
};

// Snapshot of one block, for inspection and for seeding test states.
struct BlockView {
  std::string file;
  std::uint64_t size = 0;
  bool dirty = false;
  double last_access = 0;
  double entry_time = 0;
};

struct FileUsage {
  std::uint64_t cached = 0;
  std::uint64_t dirty = 0;
};

// Per-host page cache state: two LRU lists plus free/anonymous accounting.
//
// Concurrency contract: every operation mutates list and accounting state
// synchronously, before any timed device transfer it performs. Processes
// interleave only at transfer boundaries, so between events the state is
// consistent and two processes can never spend the same free bytes.
class MemoryManager {
 public:
  MemoryManager(sim::Engine& eng, CacheConfig cfg,
                storage::StorageDevice& memory_device,
                storage::StorageDevice& backing_disk)
      : eng_(eng), cfg_(cfg), memory_(memory_device), disk_(backing_disk) {
    if (cfg_.total_mem == 0) {
      throw ConfigError("page cache needs a positive total_mem");
    }
    if (!(cfg_.dirty_ratio > 0 && cfg_.dirty_ratio < 1)) {
      throw ConfigError("dirty_ratio must be in (0, 1)");
    }
    if (!(cfg_.expire_time > 0) || !(cfg_.flush_interval > 0)) {
      throw ConfigError("expire_time and flush_interval must be positive");
    }
    free_ = cfg_.total_mem;
  }

  MemoryManager(const MemoryManager&) = delete;
  MemoryManager& operator=(const MemoryManager&) = delete;

  const CacheConfig& config() const { return cfg_; }
  storage::StorageDevice& memory_device() { return memory_; }
  storage::StorageDevice& backing_disk() { return disk_; }

  std::uint64_t total_mem() const { return cfg_.total_mem; }
  std::uint64_t free_mem() const { return free_; }
  std::uint64_t anonymous() const { return anon_; }
  std::uint64_t cached() const { return inactive_.bytes() + active_.bytes(); }
  std::uint64_t dirty() const {
    return inactive_.dirty_bytes() + active_.dirty_bytes();
  }
  std::uint64_t evictable() const { return cached() - dirty(); }
  // Memory the application sees as obtainable: free plus reclaimable cache.
  std::uint64_t avail_mem() const { return free_ + cached(); }

  std::uint64_t cached(const std::string& file) const {
    auto it = file_usage_.find(file);
    return it == file_usage_.end() ? 0 : it->second.cached;
  }

  std::uint64_t dirty_of(const std::string& file) const {
    auto it = file_usage_.find(file);
    return it == file_usage_.end() ? 0 : it->second.dirty;
  }

  // ---- Anonymous memory ----

  void use_anonymous_mem(std::uint64_t amount) {
    if (amount == 0) return;
    if (amount > free_) {
      throw ContractViolation("anonymous allocation of " +
                              std::to_string(amount) + " exceeds free memory");
    }
    free_ -= amount;
    anon_ += amount;
    notify();
  }

  void release_anonymous_mem(std::uint64_t amount) {
    if (amount == 0) return;
    if (amount > anon_) {
      throw ContractViolation("anonymous release of " + std::to_string(amount) +
                              " exceeds allocated anonymous memory");
    }
    anon_ -= amount;
    free_ += amount;
    notify();
  }

  // ---- Cache population ----

  // Inserts freshly disk-read bytes as one clean block at the inactive MRU
  // end. Costs no simulated time: the memory copy overlaps the disk read
  // that the caller just performed.
  void add_to_cache(const std::string& file, std::uint64_t amount) {
    if (amount == 0) return;
    if (amount > free_) {
      throw ContractViolation("add_to_cache of " + std::to_string(amount) +
                              " exceeds free memory");
    }
    free_ -= amount;
    insert_block(inactive_, eng_.now(),
                 {file, amount, false, eng_.now()});
    notify();
  }

  // Inserts application-written bytes as one dirty block at the inactive
  // MRU end, then performs the timed memory write.
  sim::Task<sim::SimTime> write_to_cache(const std::string& file,
                                         std::uint64_t amount) {
    if (amount == 0) co_return 0.0;
    if (amount > free_) {
      throw ContractViolation("write_to_cache of " + std::to_string(amount) +
                              " exceeds free memory");
    }
    free_ -= amount;
    insert_block(inactive_, eng_.now(), {file, amount, true, eng_.now()});
    notify();
    sim::SimTime t0 = eng_.now();
    co_await memory_.write(amount);
    co_return eng_.now() - t0;
  }

  // ---- Cache read ----

  // Promotes `amount` bytes of `file` to the active MRU end (inactive list
  // first, LRU order within each list), then performs the timed memory
  // read. Touched dirty blocks move individually and keep their entry
  // times; touched clean bytes merge into a single block. A partially
  // touched block is split, the untouched part keeping its position.
  sim::Task<sim::SimTime> cache_read(const std::string& file,
                                     std::uint64_t amount) {
    if (amount == 0) co_return 0.0;
    promote_for_read(file, amount);
    sim::SimTime t0 = eng_.now();
    co_await memory_.read(amount);
    co_return eng_.now() - t0;
  }

  // ---- Flush and eviction ----

  // Marks up to ceil(amount) dirty bytes clean, LRU-first, inactive list
  // before active, skipping `exclude`; then performs one timed disk write
  // of everything marked. Non-positive amounts are a no-op. A partially
  // flushed block splits into a clean part (keeping its position) and a
  // dirty remainder placed right after it.
  sim::Task<sim::SimTime> flush(double amount,
                                const std::string* exclude = nullptr) {
    std::uint64_t marked = mark_for_flush(amount, exclude);
    if (marked == 0) co_return 0.0;
    sim::SimTime t0 = eng_.now();
    co_await disk_.write(marked);
    co_return eng_.now() - t0;
  }

  // Removes up to ceil(amount) clean bytes from the inactive list only,
  // LRU-first, skipping `exclude`. Returns the bytes reclaimed; costs no
  // simulated time.
  std::uint64_t evict(double amount, const std::string* exclude = nullptr) {
    if (!(amount > 0)) return 0;
    const auto target = static_cast<std::uint64_t>(std::ceil(amount));
    std::uint64_t done = 0;
    const auto& clean = inactive_.clean_keys();
    auto it = clean.begin();
    while (it != clean.end() && done < target) {
      const BlockKey key = *it;
      ++it;  // advance before the set loses this key
      const DataBlock* b = inactive_.find(key);
      if (exclude && b->file == *exclude) continue;
      const std::uint64_t need = target - done;
      if (b->size <= need) {
        done += b->size;
        remove_block(inactive_, key);
      } else {
        shrink_block(inactive_, key, need);
        done += need;
      }
    }
    if (done > 0) {
      free_ += done;
      rebalance();
      notify();
    }
    return done;
  }

  // Moves LRU blocks from the active head to the inactive list until the
  // active list is at most twice the inactive list (in bytes).
  void balance_lists() {
    if (rebalance()) notify();
  }

  // Background process: every flush_interval, flushes all expired dirty
  // blocks (entry older than expire_time), inactive list first; if a cycle's
  // flushing takes longer than the interval the next cycle starts
  // immediately. First cycle begins at t = flush_interval.
  sim::Task<void> periodic_flush_process() {
    const double interval = cfg_.flush_interval;
    co_await eng_.sleep(interval);
    for (;;) {
      const sim::SimTime cycle_start = eng_.now();
      struct Hit {
        bool inactive;
        BlockKey key;
      };
      std::vector<Hit> expired;
      for (BlockList* list : {&inactive_, &active_}) {
        for (const BlockKey& key : list->dirty_keys()) {
          if (cycle_start - list->find(key)->entry_time > cfg_.expire_time) {
            expired.push_back({list == &inactive_, key});
          }
        }
      }
      for (const Hit& hit : expired) {
        BlockList& list = hit.inactive ? inactive_ : active_;
        const DataBlock* b = list.find(hit.key);
        // Foreground I/O may have flushed, evicted or promoted the block
        // while this cycle was writing; a moved block keeps its entry time
        // and is caught by a later cycle.
        if (b == nullptr || !b->dirty) continue;
        const std::uint64_t size = b->size;
        const std::string file = b->file;
        mark_clean_block(list, hit.key);
        disk_.grow_file(file, size);
        notify();
        co_await disk_.write(size);
      }
      const sim::SimTime flushing_time = eng_.now() - cycle_start;
      if (flushing_time < interval) {
        co_await eng_.sleep(interval - flushing_time);
      }
    }
  }

  // ---- Inspection ----

  std::vector<BlockView> inactive_blocks() const { return views(inactive_); }
  std::vector<BlockView> active_blocks() const { return views(active_); }

  // Per-file cache usage, name-sorted, files with no resident bytes omitted.
  std::vector<std::pair<std::string, FileUsage>> per_file_usage() const {
    std::vector<std::pair<std::string, FileUsage>> out;
    for (const auto& [file, usage] : file_usage_) {
      if (usage.cached > 0) out.emplace_back(file, usage);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  // Replaces the whole cache state; for tests and replay. Views must come
  // ordered by last_access within each list.
  void load_blocks(const std::vector<BlockView>& inactive,
                   const std::vector<BlockView>& active,
                   std::uint64_t anonymous = 0) {
    inactive_ = BlockList{};
    active_ = BlockList{};
    file_usage_.clear();
    std::uint64_t used = anonymous;
    for (auto [list, src] :
         {std::pair{&inactive_, &inactive}, std::pair{&active_, &active}}) {
      double prev = -std::numeric_limits<double>::infinity();
      for (const BlockView& v : *src) {
        if (v.last_access < prev) {
          throw ContractViolation("loaded blocks must be in last_access order");
        }
        if (v.entry_time > v.last_access) {
          throw ContractViolation("block entry_time after its last access");
        }
        prev = v.last_access;
        insert_block(*list, v.last_access,
                     {v.file, v.size, v.dirty, v.entry_time});
        used += v.size;
      }
    }
    if (used > cfg_.total_mem) {
      throw ContractViolation("loaded state exceeds total memory");
    }
    anon_ = anonymous;
    free_ = cfg_.total_mem - used;
    notify();
  }

  // Fires after every state-changing operation.
  void add_observer(std::function<void(const MemoryManager&)> fn) {
    observers_.push_back(std::move(fn));
  }

  // Cheap consistency check, also run after every mutation.
  void check_invariants() const {
    if (free_ + anon_ + cached() != cfg_.total_mem) {
      throw ContractViolation(
          "memory conservation violated: free " + std::to_string(free_) +
          " + anonymous " + std::to_string(anon_) + " + cached " +
          std::to_string(cached()) + " != total " +
          std::to_string(cfg_.total_mem));
    }
  }

 private:
  std::vector<BlockView> views(const BlockList& list) const {
    std::vector<BlockView> out;
    out.reserve(list.block_count());
    for (const auto& [key, b] : list.blocks()) {
      out.push_back({b.file, b.size, b.dirty, key.first, b.entry_time});
    }
    return out;
  }

  void insert_block(BlockList& list, double last_access, DataBlock block) {
    FileUsage& fu = file_usage_[block.file];
    fu.cached += block.size;
    if (block.dirty) fu.dirty += block.size;
    list.insert({last_access, seq_++}, std::move(block));
  }

  void insert_block_at(BlockList& list, const BlockKey& key,
                       DataBlock block) {
    FileUsage& fu = file_usage_[block.file];
    fu.cached += block.size;
    if (block.dirty) fu.dirty += block.size;
    list.insert(key, std::move(block));
  }

  DataBlock remove_block(BlockList& list, const BlockKey& key) {
    DataBlock b = list.take(key);
    FileUsage& fu = file_usage_[b.file];
    fu.cached -= b.size;
    if (b.dirty) fu.dirty -= b.size;
    return b;
  }

  void mark_clean_block(BlockList& list, const BlockKey& key) {
    const DataBlock* b = list.find(key);
    file_usage_[b->file].dirty -= b->size;
    list.mark_clean(key);
  }

  void shrink_block(BlockList& list, const BlockKey& key, std::uint64_t by) {
    const DataBlock* b = list.find(key);
    FileUsage& fu = file_usage_[b->file];
    fu.cached -= by;
    if (b->dirty) fu.dirty -= by;
    list.shrink(key, by);
  }

  std::uint64_t mark_for_flush(double amount, const std::string* exclude) {
    if (!(amount > 0)) return 0;
    const auto target = static_cast<std::uint64_t>(std::ceil(amount));
    std::uint64_t done = 0;
    // Flushed bytes become part of each file's on-disk footprint.
    std::map<std::string, std::uint64_t> by_file;
    for (BlockList* list : {&inactive_, &active_}) {
      const auto& dirty = list->dirty_keys();
      auto it = dirty.begin();
      while (it != dirty.end() && done < target) {
        const BlockKey key = *it;
        ++it;  // advance before the set loses this key
        const DataBlock* b = list->find(key);
        if (exclude && b->file == *exclude) continue;
        const std::uint64_t need = target - done;
        if (b->size <= need) {
          by_file[b->file] += b->size;
          done += b->size;
          mark_clean_block(*list, key);
        } else {
          // Split: clean part keeps the position, dirty remainder follows.
          DataBlock orig = remove_block(*list, key);
          by_file[orig.file] += need;
          done += need;
          insert_block_at(*list, key,
                          {orig.file, need, false, orig.entry_time});
          insert_block_at(*list, {key.first, seq_++},
                          {orig.file, orig.size - need, true, orig.entry_time});
        }
      }
      if (done >= target) break;
    }
    for (const auto& [file, bytes] : by_file) disk_.grow_file(file, bytes);
    if (done > 0) notify();
    return done;
  }

  void promote_for_read(const std::string& file, std::uint64_t amount) {
    if (cached(file) < amount) {
      throw ContractViolation("cache_read of " + std::to_string(amount) +
                              " bytes exceeds cached bytes of '" + file + "'");
    }
    const double now = eng_.now();
    std::uint64_t remaining = amount;
    std::uint64_t clean_total = 0;
    double clean_entry = std::numeric_limits<double>::infinity();
    std::vector<DataBlock> promoted_dirty;
    for (BlockList* list : {&inactive_, &active_}) {
      if (remaining == 0) break;
      const std::set<BlockKey>* keys = list->file_keys(file);
      if (keys == nullptr) continue;
      auto it = keys->begin();
      while (it != keys->end() && remaining > 0) {
        const BlockKey key = *it;
        ++it;  // advance before the set loses this key
        const DataBlock* b = list->find(key);
        const std::uint64_t take = std::min(b->size, remaining);
        if (take == b->size) {
          DataBlock blk = remove_block(*list, key);
          if (blk.dirty) {
            promoted_dirty.push_back(std::move(blk));
          } else {
            clean_total += take;
            clean_entry = std::min(clean_entry, blk.entry_time);
          }
        } else {
          if (b->dirty) {
            promoted_dirty.push_back({file, take, true, b->entry_time});
          } else {
            clean_total += take;
            clean_entry = std::min(clean_entry, b->entry_time);
          }
          shrink_block(*list, key, take);
        }
        remaining -= take;
      }
    }
    // Dirty blocks move individually (entry times differ); clean bytes
    // merge into one block stamped with the oldest merged entry.
    for (DataBlock& blk : promoted_dirty) {
      insert_block(active_, now, std::move(blk));
    }
    if (clean_total > 0) {
      insert_block(active_, now, {file, clean_total, false, clean_entry});
    }
    rebalance();
    notify();
  }

  bool rebalance() {
    bool moved = false;
    while (active_.bytes() > 2 * inactive_.bytes()) {
      const std::uint64_t a = active_.bytes();
      const std::uint64_t i = inactive_.bytes();
      // Moving x bytes reaches a - x <= 2(i + x); round up.
      const std::uint64_t need = (a - 2 * i + 2) / 3;
      const BlockKey key = active_.blocks().begin()->first;
      const DataBlock* b = active_.find(key);
      if (b->size <= need) {
        DataBlock blk = remove_block(active_, key);
        insert_block(inactive_, key.first, std::move(blk));
      } else {
        DataBlock part{b->file, need, b->dirty, b->entry_time};
        shrink_block(active_, key, need);
        insert_block(inactive_, key.first, std::move(part));
      }
      moved = true;
    }
    return moved;
  }

  void notify() {
    check_invariants();
    for (const auto& fn : observers_) fn(*this);
  }

  sim::Engine& eng_;
  CacheConfig cfg_;
  storage::StorageDevice& memory_;
  storage::StorageDevice& disk_;
  BlockList inactive_;
  BlockList active_;
  std::uint64_t free_ = 0;
  std::uint64_t anon_ = 0;
  std::uint64_t seq_ = 0;
  std::unordered_map<std::string, FileUsage> file_usage_;
  std::vector<std::function<void(const MemoryManager&)>> observers_;
};

}  // namespace pagesim::cache
