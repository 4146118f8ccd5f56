#pragma once

// Reference model of the page-cache list operations, kept deliberately
// primitive: plain vectors, linear scans, no indices. The production
// MemoryManager maintains the same state behind ordered maps and secondary
// indices; the equivalence suite checks both against each other on random
// operation sequences.
//
// Conventions shared with the production code (the tie-break rules that the
// LRU ordering alone does not determine):
//   - flush split: the clean part keeps the block's list position, the
//     still-dirty remainder is inserted immediately after it;
//   - evict split: the surviving remainder keeps the block's position;
//   - cache_read: touched dirty blocks are appended to the active list
//     individually in traversal order, then all touched clean bytes are
//     appended as one merged block whose entry_time is the minimum of the
//     merged parts;
//   - balance: a block moved from the active head is inserted after every
//     inactive block with the same or earlier last_access; a split leaves
//     the remainder at the active head.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cacheoracle {

struct Block {
  std::string file;
  std::uint64_t size = 0;
  bool dirty = false;
  double last_access = 0;
  double entry = 0;
};

using List = std::vector<Block>;

struct State {
  List inactive;
  List active;
};

inline std::uint64_t list_bytes(const List& l) {
  std::uint64_t n = 0;
  for (const auto& b : l) n += b.size;
  return n;
}

inline std::uint64_t dirty_bytes(const State& s) {
  std::uint64_t n = 0;
  for (const auto* l : {&s.inactive, &s.active}) {
    for (const auto& b : *l) {
      if (b.dirty) n += b.size;
    }
  }
  return n;
}

inline std::uint64_t cached_bytes(const State& s) {
  return list_bytes(s.inactive) + list_bytes(s.active);
}

inline std::uint64_t cached_of(const State& s, const std::string& file) {
  std::uint64_t n = 0;
  for (const auto* l : {&s.inactive, &s.active}) {
    for (const auto& b : *l) {
      if (b.file == file) n += b.size;
    }
  }
  return n;
}

// Marks dirty bytes clean, LRU-first, inactive list before active, skipping
// `exclude`. Returns the number of bytes flushed (what the disk write must
// then carry).
inline std::uint64_t flush(State& s, double amount,
                           const std::string* exclude = nullptr) {
  if (!(amount > 0)) return 0;
  const std::uint64_t target = static_cast<std::uint64_t>(std::ceil(amount));
  std::uint64_t done = 0;
  for (List* list : {&s.inactive, &s.active}) {
    for (std::size_t i = 0; i < list->size() && done < target; ++i) {
      Block& b = (*list)[i];
      if (!b.dirty || (exclude && b.file == *exclude)) continue;
      std::uint64_t need = target - done;
      if (b.size <= need) {
        b.dirty = false;
        done += b.size;
      } else {
        Block rest = b;
        rest.size = b.size - need;
        b.size = need;
        b.dirty = false;
        list->insert(list->begin() + i + 1, rest);
        done += need;
      }
    }
    if (done >= target) break;
  }
  return done;
}

// Removes clean bytes from the inactive list only, LRU-first, skipping
// `exclude`. Returns bytes evicted.
inline std::uint64_t evict(State& s, double amount,
                           const std::string* exclude = nullptr) {
  if (!(amount > 0)) return 0;
  const std::uint64_t target = static_cast<std::uint64_t>(std::ceil(amount));
  std::uint64_t done = 0;
  for (std::size_t i = 0; i < s.inactive.size() && done < target;) {
    Block& b = s.inactive[i];
    if (b.dirty || (exclude && b.file == *exclude)) {
      ++i;
      continue;
    }
    std::uint64_t need = target - done;
    if (b.size <= need) {
      done += b.size;
      s.inactive.erase(s.inactive.begin() + i);
    } else {
      b.size -= need;
      done += need;
    }
  }
  return done;
}

inline void balance(State& s) {
  for (;;) {
    std::uint64_t a = list_bytes(s.active);
    std::uint64_t i = list_bytes(s.inactive);
    if (a <= 2 * i) break;
    // Moving x bytes reaches a - x = 2(i + x); round up so one move settles
    // an exactly solvable imbalance.
    std::uint64_t need = (a - 2 * i + 2) / 3;
    Block moved = s.active.front();
    if (moved.size <= need) {
      s.active.erase(s.active.begin());
    } else {
      moved.size = need;
      s.active.front().size -= need;
    }
    auto pos = std::find_if(
        s.inactive.begin(), s.inactive.end(),
        [&](const Block& b) { return b.last_access > moved.last_access; });
    s.inactive.insert(pos, moved);
  }
}

// Promotes `amount` bytes of `file` to the active MRU end, inactive list
// first, LRU-first within each list, then rebalances. `now` becomes the
// promoted bytes' last_access.
inline void cache_read(State& s, const std::string& file, std::uint64_t amount,
                       double now) {
  if (cached_of(s, file) < amount) {
    throw std::logic_error("oracle cache_read beyond cached bytes");
  }
  std::uint64_t remaining = amount;
  std::uint64_t clean_total = 0;
  double clean_entry = std::numeric_limits<double>::infinity();
  std::vector<Block> promoted_dirty;
  for (List* list : {&s.inactive, &s.active}) {
    for (std::size_t i = 0; i < list->size() && remaining > 0;) {
      Block& b = (*list)[i];
      if (b.file != file) {
        ++i;
        continue;
      }
      std::uint64_t take = std::min<std::uint64_t>(b.size, remaining);
      if (b.dirty) {
        promoted_dirty.push_back({file, take, true, now, b.entry});
      } else {
        clean_total += take;
        clean_entry = std::min(clean_entry, b.entry);
      }
      remaining -= take;
      if (take == b.size) {
        list->erase(list->begin() + i);
      } else {
        b.size -= take;
        ++i;
      }
    }
    if (remaining == 0) break;
  }
  for (const auto& blk : promoted_dirty) s.active.push_back(blk);
  if (clean_total > 0) {
    s.active.push_back({file, clean_total, false, now, clean_entry});
  }
  balance(s);
}

// Appends a block to the inactive tail (simulation time is monotone, so the
// tail is the right LRU position).
inline void append_inactive(State& s, const std::string& file,
                            std::uint64_t amount, bool dirty, double now) {
  if (amount > 0) s.inactive.push_back({file, amount, dirty, now, now});
}

}  // namespace cacheoracle
