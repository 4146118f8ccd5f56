#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include "pagesim/errors.hpp"

namespace pagesim::cache {

// List position of a block: (last access time, insertion sequence number).
// The sequence number is global and monotone, so blocks touched at the same
// simulated time keep their insertion order and every key is unique.
using BlockKey = std::pair<double, std::uint64_t>;

struct DataBlock {
  std::string file;
  std::uint64_t size = 0;
  bool dirty = false;
  double entry_time = 0;
};

// One LRU list. Map order over BlockKey is the physical list order. The
// dirty/clean/per-file key sets exist so flush, evict and per-file reads
// select candidate blocks in O(log n) instead of scanning the whole list;
// a 100 GB working set holds ~10^5 blocks, and chunk-level I/O touches the
// lists millions of times per run.
class BlockList {
 public:
  bool empty() const { return blocks_.empty(); }
  std::size_t block_count() const { return blocks_.size(); }
  std::uint64_t bytes() const { return bytes_; }
  std::uint64_t dirty_bytes() const { return dirty_bytes_; }

  const std::map<BlockKey, DataBlock>& blocks() const { return blocks_; }
  const std::set<BlockKey>& dirty_keys() const { return dirty_keys_; }
  const std::set<BlockKey>& clean_keys() const { return clean_keys_; }

  // Keys of one file's blocks; the set persists (possibly empty) once the
  // file has been seen, so iterators held across erasures stay attached to
  // a live container.
  const std::set<BlockKey>* file_keys(const std::string& file) const {
    auto it = by_file_.find(file);
    return it == by_file_.end() ? nullptr : &it->second;
  }

  const DataBlock* find(const BlockKey& key) const {
    auto it = blocks_.find(key);
    return it == blocks_.end() ? nullptr : &it->second;
  }

  void insert(const BlockKey& key, DataBlock block) {
    if (block.size == 0) {
      throw ContractViolation("empty data block inserted into LRU list");
    }
    auto [it, fresh] = blocks_.emplace(key, std::move(block));
    if (!fresh) {
      throw ContractViolation("duplicate block key in LRU list");
    }
    const DataBlock& b = it->second;
    bytes_ += b.size;
    if (b.dirty) {
      dirty_bytes_ += b.size;
      dirty_keys_.insert(key);
    } else {
      clean_keys_.insert(key);
    }
    by_file_[b.file].insert(key);
  }

  DataBlock take(const BlockKey& key) {
    auto it = blocks_.find(key);
    if (it == blocks_.end()) {
      throw ContractViolation("take of a block key not in this list");
    }
    DataBlock b = std::move(it->second);
    bytes_ -= b.size;
    if (b.dirty) {
      dirty_bytes_ -= b.size;
      dirty_keys_.erase(key);
    } else {
      clean_keys_.erase(key);
    }
    by_file_[b.file].erase(key);
    blocks_.erase(it);
    return b;
  }

  void mark_clean(const BlockKey& key) {
    auto it = blocks_.find(key);
    if (it == blocks_.end() || !it->second.dirty) {
      throw ContractViolation("mark_clean needs an existing dirty block");
    }
    it->second.dirty = false;
    dirty_bytes_ -= it->second.size;
    dirty_keys_.erase(key);
    clean_keys_.insert(key);
  }

  // Shrinks a block in place; the remainder keeps its list position.
  void shrink(const BlockKey& key, std::uint64_t by) {
    auto it = blocks_.find(key);
    if (it == blocks_.end() || by == 0 || by >= it->second.size) {
      throw ContractViolation("shrink must leave a smaller, nonempty block");
    }
    it->second.size -= by;
    bytes_ -= by;
    if (it->second.dirty) dirty_bytes_ -= by;
  }

 private:
  std::map<BlockKey, DataBlock> blocks_;
  std::set<BlockKey> dirty_keys_;
  std::set<BlockKey> clean_keys_;
  std::unordered_map<std::string, std::set<BlockKey>> by_file_;
  std::uint64_t bytes_ = 0;
  std::uint64_t dirty_bytes_ = 0;
};

}  // namespace pagesim::cache
