#pragma once

// Conversions and equality assertions between the production MemoryManager
// state and the reference model in cache_oracle.hpp.

#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pagesim/cache/memory_manager.hpp"
#include "support/cache_oracle.hpp"

namespace cachecmp {

inline std::vector<cacheoracle::Block> to_oracle(
    const std::vector<pagesim::cache::BlockView>& views) {
  std::vector<cacheoracle::Block> out;
  out.reserve(views.size());
  for (const auto& v : views) {
    out.push_back({v.file, v.size, v.dirty, v.last_access, v.entry_time});
  }
  return out;
}

inline cacheoracle::State oracle_of(const pagesim::cache::MemoryManager& mm) {
  return {to_oracle(mm.inactive_blocks()), to_oracle(mm.active_blocks())};
}

inline std::vector<pagesim::cache::BlockView> to_views(
    const std::vector<cacheoracle::Block>& blocks) {
  std::vector<pagesim::cache::BlockView> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    out.push_back({b.file, b.size, b.dirty, b.last_access, b.entry});
  }
  return out;
}

inline void expect_list_eq(const std::vector<cacheoracle::Block>& got,
                           const std::vector<cacheoracle::Block>& want,
                           const char* which) {
  ASSERT_EQ(got.size(), want.size()) << which << " list length differs";
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].file, want[i].file) << which << " block " << i;
    EXPECT_EQ(got[i].size, want[i].size) << which << " block " << i;
    EXPECT_EQ(got[i].dirty, want[i].dirty) << which << " block " << i;
    EXPECT_EQ(got[i].last_access, want[i].last_access)
        << which << " block " << i;
    EXPECT_EQ(got[i].entry, want[i].entry) << which << " block " << i;
  }
}

inline void expect_state_eq(const pagesim::cache::MemoryManager& mm,
                            const cacheoracle::State& want) {
  expect_list_eq(to_oracle(mm.inactive_blocks()), want.inactive, "inactive");
  expect_list_eq(to_oracle(mm.active_blocks()), want.active, "active");
}

}  // namespace cachecmp
