#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pagesim/cache/memory_manager.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/metrics/recorder.hpp"
#include "pagesim/metrics/records.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/storage/device.hpp"
#include "pagesim/workload/runner.hpp"

using pagesim::ConfigError;
using pagesim::cache::CacheConfig;
using pagesim::cache::MemoryManager;
using pagesim::cache::WritePolicy;
using pagesim::metrics::MemorySample;
using pagesim::metrics::OpKind;
using pagesim::metrics::OpRecord;
using pagesim::metrics::Recorder;
using pagesim::metrics::sample_memory;
using pagesim::metrics::snapshot_cache;
using pagesim::sim::Engine;
using pagesim::sim::SimTime;
using pagesim::sim::Task;
using pagesim::storage::StorageDevice;
using pagesim::workload::PipelineSpec;
using pagesim::workload::StorageBinding;
using pagesim::workload::TaskSpec;
using pagesim::workload::WorkloadRunner;

namespace {

constexpr std::uint64_t kDiskCap = 483183820800;  // 450 GiB

struct Rig {
  explicit Rig(std::uint64_t total_mem)
      : mem(eng, "mem", total_mem, 4812e6, 4812e6),
        disk(eng, "disk", kDiskCap, 465e6, 465e6),
        mm(eng, CacheConfig{total_mem, 0.2, 30.0, 5.0,
                            WritePolicy::kWriteback},
           mem, disk),
        rec(eng, &mm) {}

  Engine eng;
  StorageDevice mem;
  StorageDevice disk;
  MemoryManager mm;
  Recorder rec;
};

Task<void> write_then_anon(Engine& eng, MemoryManager& mm) {
  co_await mm.write_to_cache("g", 1'000'000'000);
  co_await eng.sleep(1.0);
  mm.use_anonymous_mem(500);
}

Task<void> idle_for(Engine& eng, SimTime span) {
  co_await eng.sleep(span);
}

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

TEST(Metrics, SampleReflectsManagerState) {
  Rig rig(10e9);
  MemorySample empty = sample_memory(0.0, &rig.mm);
  EXPECT_EQ(empty.total_used, 0u);
  EXPECT_EQ(empty.cached, 0u);
  rig.mm.add_to_cache("f", 1'000'000'000);
  rig.mm.use_anonymous_mem(500);
  MemorySample s = sample_memory(2.5, &rig.mm);
  EXPECT_DOUBLE_EQ(s.time, 2.5);
  EXPECT_EQ(s.cached, 1'000'000'000u);
  EXPECT_EQ(s.dirty, 0u);
  EXPECT_EQ(s.anonymous, 500u);
  EXPECT_EQ(s.total_used, 1'000'000'500u);
  MemorySample none = sample_memory(0.0, nullptr);
  EXPECT_EQ(none.total_used, 0u);
}

TEST(Metrics, SnapshotAggregatesPerFileNameSorted) {
  Rig rig(10e9);
  rig.mm.add_to_cache("b", 1'000'000'000);
  rig.eng.spawn("p", write_then_anon(rig.eng, rig.mm));
  rig.eng.run_until_idle();
  auto snap = snapshot_cache(rig.eng.now(), &rig.mm);
  ASSERT_EQ(snap.files.size(), 2u);
  EXPECT_EQ(snap.files[0].first, "b");
  EXPECT_EQ(snap.files[0].second.cached, 1'000'000'000u);
  EXPECT_EQ(snap.files[0].second.dirty, 0u);
  EXPECT_EQ(snap.files[1].first, "g");
  EXPECT_EQ(snap.files[1].second.cached, 1'000'000'000u);
  EXPECT_EQ(snap.files[1].second.dirty, 1'000'000'000u);
  std::uint64_t sum = 0;
  for (const auto& [file, usage] : snap.files) sum += usage.cached;
  EXPECT_EQ(sum, rig.mm.cached());
}

TEST(Metrics, EventSamplingSeesEveryChange) {
  Rig rig(10e9);
  rig.rec.attach(rig.mm);
  rig.eng.spawn("p", write_then_anon(rig.eng, rig.mm));
  rig.eng.run_until_idle();
  const auto& profile = rig.rec.memory_profile();
  ASSERT_GE(profile.size(), 2u);
  for (size_t i = 1; i < profile.size(); ++i) {
    EXPECT_LE(profile[i - 1].time, profile[i].time);
  }
  // Write of 1e9 at memory bandwidth ends at 0.20781379883624274, then +1.0.
  const MemorySample& last = profile.back();
  EXPECT_DOUBLE_EQ(last.time, 1.2078137988362427);
  EXPECT_EQ(last.anonymous, 500u);
  for (const MemorySample& s : profile) {
    EXPECT_LE(s.dirty, s.cached);
    EXPECT_EQ(s.total_used, s.cached + s.anonymous);
    EXPECT_LE(s.total_used, rig.mm.total_mem());
  }
}

TEST(Metrics, CadenceSamplesOnTheDot) {
  Rig rig(10e9);
  rig.eng.spawn_daemon("sampler", rig.rec.cadence_process(0.1));
  rig.eng.spawn("clock", idle_for(rig.eng, 1.0));
  rig.eng.run_until_idle();
  const auto& profile = rig.rec.memory_profile();
  ASSERT_GE(profile.size(), 10u);
  ASSERT_LE(profile.size(), 11u);
  SimTime expected = 0.0;
  for (const MemorySample& s : profile) {
    EXPECT_DOUBLE_EQ(s.time, expected);
    expected += 0.1;
  }
  EXPECT_THROW(rig.rec.cadence_process(0.0), ConfigError);
}

TEST(Metrics, FileOpsTriggerCacheSnapshots) {
  Rig rig(10e9);
  rig.mm.add_to_cache("f", 1'000'000'000);
  rig.rec.record_op({"i0", "t", OpKind::kRead, "f", 0.0, 1.0});
  rig.rec.record_op({"i0", "t", OpKind::kCompute, "", 1.0, 2.0});
  rig.rec.record_op({"i0", "t", OpKind::kWrite, "g", 2.0, 3.0});
  EXPECT_EQ(rig.rec.ops().size(), 3u);
  ASSERT_EQ(rig.rec.cache_snapshots().size(), 2u);  // compute takes none
  EXPECT_EQ(rig.rec.cache_snapshots()[0].files.size(), 1u);
}

TEST(Metrics, CsvExportsHaveStableShape) {
  Rig rig(10e9);
  rig.rec.attach(rig.mm);
  rig.mm.add_to_cache("f", 1'000'000'000);
  rig.rec.record_op({"i0", "t1", OpKind::kRead, "f", 0.0,
                     2.150537634408602});
  const std::string dir = testing::TempDir();
  rig.rec.write_memory_csv(dir + "memory_profile.csv");
  rig.rec.write_ops_csv(dir + "ops.csv");
  rig.rec.write_snapshots_csv(dir + "cache_snapshots.csv");

  auto mem = lines_of(dir + "memory_profile.csv");
  ASSERT_EQ(mem.size(), 2u);
  EXPECT_EQ(mem[0], "time,total_used,cached,dirty,anonymous");
  EXPECT_EQ(mem[1], "0.000000,1000000000,1000000000,0,0");

  auto ops = lines_of(dir + "ops.csv");
  ASSERT_EQ(ops.size(), 2u);
  EXPECT_EQ(ops[0], "instance,task,kind,file,start,end");
  EXPECT_EQ(ops[1], "i0,t1,read,f,0.000000,2.150538");

  auto snaps = lines_of(dir + "cache_snapshots.csv");
  ASSERT_EQ(snaps.size(), 2u);
  EXPECT_EQ(snaps[0], "time,file,cached,dirty");
  EXPECT_EQ(snaps[1], "0.000000,f,1000000000,0");
}

TEST(Metrics, EmptyRunWritesHeadersOnly) {
  Rig rig(10e9);
  const std::string dir = testing::TempDir();
  rig.rec.write_memory_csv(dir + "empty_memory.csv");
  rig.rec.write_ops_csv(dir + "empty_ops.csv");
  rig.rec.write_snapshots_csv(dir + "empty_snaps.csv");
  EXPECT_EQ(lines_of(dir + "empty_memory.csv").size(), 1u);
  EXPECT_EQ(lines_of(dir + "empty_ops.csv").size(), 1u);
  EXPECT_EQ(lines_of(dir + "empty_snaps.csv").size(), 1u);
  EXPECT_THROW(rig.rec.write_ops_csv("/nonexistent-dir/ops.csv"),
               ConfigError);
}

TEST(Metrics, CapturesAWholeWorkloadRun) {
  Rig rig(100e9);
  rig.rec.attach(rig.mm);
  rig.disk.register_file("in", 3'000'000'000);
  WorkloadRunner runner(
      rig.eng, StorageBinding{&rig.mm, &rig.disk, nullptr, nullptr,
                              1'000'000'000},
      [&rig](const OpRecord& r) { rig.rec.record_op(r); });
  PipelineSpec p{{TaskSpec{"t1",
                           {{"in", 3'000'000'000}},
                           {{"out", 3'000'000'000}},
                           4.4}}};
  runner.spawn_instances(p, 1);
  rig.eng.run_until_idle();
  EXPECT_EQ(rig.rec.ops().size(), 3u);
  EXPECT_EQ(rig.rec.cache_snapshots().size(), 2u);
  ASSERT_FALSE(rig.rec.memory_profile().empty());
  for (const MemorySample& s : rig.rec.memory_profile()) {
    EXPECT_LE(s.dirty, s.cached);
    EXPECT_EQ(s.total_used, s.cached + s.anonymous);
    EXPECT_LE(s.total_used, rig.mm.total_mem());
  }
  // Snapshot after the read: "in" fully cached; after the write: both files.
  EXPECT_EQ(rig.rec.cache_snapshots()[0].files.size(), 1u);
  EXPECT_EQ(rig.rec.cache_snapshots()[1].files.size(), 2u);
}

}  // namespace
