#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int code = -1;
  std::string text;
};

// Runs the CLI through the shell with stderr folded into stdout.
CmdResult run_cmd(const std::string& args) {
  const std::string cmd = std::string(PAGESIM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr) << cmd;
  CmdResult r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) {
    r.text.append(buf, n);
  }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path temp_root() {
  const fs::path dir = fs::temp_directory_path() / "pagesim_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string write_doc(const std::string& name, const std::string& body) {
  const fs::path path = temp_root() / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

// One local host, one three-phase task; end-to-end timings are frozen in
// scenario_test and reused here through the exported summary.
constexpr char kRunDoc[] = R"({
  "version": 1,
  "name": "clirun",
  "platform": {
    "hosts": [{
      "name": "node",
      "total_mem": 100e9,
      "memory_bw": 4812e6,
      "disks": [{"name": "disk0", "capacity": 483183820800, "bw": 465e6}],
      "cache": {"dirty_ratio": 0.2, "expire_time": 30.0,
                "flush_interval": 5.0, "write_policy": "writeback"}
    }]
  },
  "workload": {
    "chunk_size": 1e9,
    "host": "node",
    "disk": "disk0",
    "pipeline": [{
      "name": "t1",
      "inputs":  [{"file": "in",  "bytes": 3e9}],
      "outputs": [{"file": "out", "bytes": 3e9}],
      "cpu_time": 4.4
    }]
  },
  "simulation": {"page_cache": true, "cadence": 0}
})";

// Two inputs held in application memory at once exceed total memory.
constexpr char kOomDoc[] = R"({
  "version": 1,
  "name": "oom",
  "platform": {
    "hosts": [{
      "name": "node",
      "total_mem": 2e9,
      "memory_bw": 4812e6,
      "disks": [{"name": "disk0", "capacity": 483183820800, "bw": 465e6}],
      "cache": {}
    }]
  },
  "workload": {
    "chunk_size": 1e9,
    "host": "node",
    "disk": "disk0",
    "pipeline": [{
      "name": "t1",
      "inputs": [{"file": "in",  "bytes": 1.2e9},
                 {"file": "in2", "bytes": 1.2e9}]
    }]
  },
  "simulation": {"page_cache": true, "cadence": 0}
})";

TEST(Cli, HelpExitsZero) {
  const CmdResult top = run_cmd("--help");
  EXPECT_EQ(top.code, 0);
  EXPECT_NE(top.text.find("run"), std::string::npos);
  EXPECT_NE(top.text.find("validate"), std::string::npos);
  const CmdResult run = run_cmd("run --help");
  EXPECT_EQ(run.code, 0);
  EXPECT_NE(run.text.find("--pagecache"), std::string::npos);
  EXPECT_NE(run.text.find("--write-policy"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cmd("").code, 1);
  EXPECT_EQ(run_cmd("frobnicate").code, 1);
  EXPECT_EQ(run_cmd("run").code, 1);
  EXPECT_EQ(run_cmd("run x.json --bogus").code, 1);
  EXPECT_EQ(run_cmd("run x.json --pagecache sideways").code, 1);
}

TEST(Cli, ValidateAcceptsBundledScenarios) {
  std::vector<fs::path> docs;
  for (const auto& entry : fs::directory_iterator(PAGESIM_SCENARIO_DIR)) {
    if (entry.path().extension() == ".json") docs.push_back(entry.path());
  }
  EXPECT_GE(docs.size(), 8u);
  for (const fs::path& doc : docs) {
    const CmdResult r = run_cmd("validate '" + doc.string() + "'");
    EXPECT_EQ(r.code, 0) << doc << "\n" << r.text;
    EXPECT_EQ(r.text, "ok\n") << doc;
  }
}

TEST(Cli, ValidateRejectsBrokenInput) {
  const CmdResult missing = run_cmd("validate /nonexistent/nowhere.json");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.text.find("scenario error:"), std::string::npos);

  const std::string broken = write_doc("broken.json", "{ not json");
  EXPECT_EQ(run_cmd("validate '" + broken + "'").code, 2);

  const std::string wrong_version =
      write_doc("wrong_version.json",
                std::string(kRunDoc).replace(
                    std::string(kRunDoc).find("\"version\": 1"), 12,
                    "\"version\": 2"));
  const CmdResult ver = run_cmd("validate '" + wrong_version + "'");
  EXPECT_EQ(ver.code, 2);
  EXPECT_NE(ver.text.find("version"), std::string::npos);
}

TEST(Cli, RunWritesExportsAndSummary) {
  const std::string doc = write_doc("run.json", kRunDoc);
  const fs::path out = temp_root() / "exports_run";
  const CmdResult r =
      run_cmd("run '" + doc + "' --output '" + out.string() + "'");
  ASSERT_EQ(r.code, 0) << r.text;
  EXPECT_NE(r.text.find("simulated time: 11.475054"), std::string::npos);
  EXPECT_NE(r.text.find("wall clock:"), std::string::npos);
  for (const char* name : {"memory_profile.csv", "ops.csv",
                           "cache_snapshots.csv", "summary.json"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  const auto summary = nlohmann::json::parse(read_all(out / "summary.json"));
  EXPECT_EQ(summary["scenario"], "clirun");
  EXPECT_EQ(summary["page_cache"], true);
  EXPECT_EQ(summary["instances"], 1);
  EXPECT_EQ(summary["phases"].size(), 3u);
  EXPECT_DOUBLE_EQ(summary["simulated_time"].get<double>(),
                   11.475054299734536);
  EXPECT_FALSE(summary.contains("wall_clock"));
}

TEST(Cli, PagecacheOffIsDiskBound) {
  const std::string doc = write_doc("run_off.json", kRunDoc);
  const fs::path out = temp_root() / "exports_off";
  const CmdResult r = run_cmd("run '" + doc + "' --pagecache off --output '" +
                              out.string() + "'");
  ASSERT_EQ(r.code, 0) << r.text;
  const auto summary = nlohmann::json::parse(read_all(out / "summary.json"));
  EXPECT_EQ(summary["write_policy"], "none");
  EXPECT_DOUBLE_EQ(summary["simulated_time"].get<double>(),
                   17.303225806451614);
  EXPECT_TRUE(summary["caches"].empty());
}

TEST(Cli, WritePolicyOverrideKeepsCacheCopies) {
  const std::string doc = write_doc("run_wt.json", kRunDoc);
  const fs::path out = temp_root() / "exports_wt";
  const CmdResult r = run_cmd("run '" + doc +
                              "' --write-policy writethrough --output '" +
                              out.string() + "'");
  ASSERT_EQ(r.code, 0) << r.text;
  const auto summary = nlohmann::json::parse(read_all(out / "summary.json"));
  EXPECT_EQ(summary["write_policy"], "writethrough");
  // Cold read and full-speed disk write match the cacheless end time, but
  // the cache keeps clean copies of both files.
  EXPECT_DOUBLE_EQ(summary["simulated_time"].get<double>(),
                   17.303225806451614);
  ASSERT_EQ(summary["caches"].size(), 1u);
  EXPECT_EQ(summary["caches"][0]["cached"], 6'000'000'000u);
  EXPECT_EQ(summary["caches"][0]["dirty"], 0u);
}

TEST(Cli, InstanceAndCadenceOverridesAreDeterministic) {
  const std::string doc = write_doc("run_multi.json", kRunDoc);
  const fs::path out_a = temp_root() / "exports_multi_a";
  const fs::path out_b = temp_root() / "exports_multi_b";
  for (const fs::path& out : {out_a, out_b}) {
    const CmdResult r = run_cmd("run '" + doc +
                                "' --instances 2 --cadence 0.5 --output '" +
                                out.string() + "'");
    ASSERT_EQ(r.code, 0) << r.text;
  }
  const auto summary =
      nlohmann::json::parse(read_all(out_a / "summary.json"));
  EXPECT_EQ(summary["instances"], 2);
  EXPECT_EQ(summary["phases"].size(), 6u);
  EXPECT_GT(count_lines(out_a / "memory_profile.csv"), 20u);
  for (const char* name : {"memory_profile.csv", "ops.csv",
                           "cache_snapshots.csv", "summary.json"}) {
    EXPECT_EQ(read_all(out_a / name), read_all(out_b / name)) << name;
  }
}

TEST(Cli, OutOfMemoryExitsThreeWithStateDump) {
  const std::string doc = write_doc("oom.json", kOomDoc);
  const fs::path out = temp_root() / "exports_oom";
  const CmdResult r =
      run_cmd("run '" + doc + "' --output '" + out.string() + "'");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.text.find("simulation error:"), std::string::npos);
  EXPECT_NE(r.text.find("out of memory"), std::string::npos);
  EXPECT_NE(r.text.find("state: t="), std::string::npos);
  EXPECT_NE(r.text.find("anonymous="), std::string::npos);
}

}  // namespace
