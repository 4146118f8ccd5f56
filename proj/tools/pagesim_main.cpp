#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pagesim/errors.hpp"
#include "pagesim/scenario/runner.hpp"
#include "pagesim/scenario/scenario.hpp"

namespace {

using pagesim::scenario::RunOptions;
using pagesim::scenario::RunResult;

void print_run(const RunResult& r, const std::string& dir, double wall_s) {
  std::printf("scenario '%s': %d instance%s, page cache %s (%s)\n",
              r.scenario.c_str(), r.instances, r.instances == 1 ? "" : "s",
              r.page_cache ? "on" : "off", r.write_policy.c_str());
  std::printf("simulated time: %.6f s\n", r.end_time);
  for (const auto& op : r.ops) {
    std::printf("  %s/%s  %-7s %-12s %12.6f -> %12.6f  (%.6f s)\n",
                op.instance.c_str(), op.task.c_str(),
                pagesim::metrics::label(op.kind), op.file.c_str(), op.start,
                op.end, op.end - op.start);
  }
  for (const auto& d : r.devices) {
    std::printf("  device %-16s read %llu B, wrote %llu B\n", d.name.c_str(),
                static_cast<unsigned long long>(d.bytes_read),
                static_cast<unsigned long long>(d.bytes_written));
  }
  for (const auto& l : r.links) {
    std::printf("  link   %-16s moved %llu B\n", l.name.c_str(),
                static_cast<unsigned long long>(l.bytes_moved));
  }
  for (const auto& c : r.caches) {
    std::printf("  cache  %-16s cached %llu B (%llu dirty), %llu free\n",
                c.host.c_str(), static_cast<unsigned long long>(c.cached),
                static_cast<unsigned long long>(c.dirty),
                static_cast<unsigned long long>(c.free_mem));
  }
  std::printf("exports written to %s\n", dir.c_str());
  std::printf("wall clock: %.3f s\n", wall_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"page-cache-aware I/O time simulator"};
  app.require_subcommand(1);

  std::string run_path;
  std::string pagecache;
  std::string policy;
  std::string outdir;
  double cadence = -1;  // negative = keep the scenario's value
  int instances = 0;    // zero = keep the scenario's value

  CLI::App* run = app.add_subcommand("run", "run a scenario, write exports");
  run->add_option("scenario", run_path, "scenario file")->required();
  run->add_option("--pagecache", pagecache, "force the page cache on or off")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--write-policy", policy, "force every cache's policy")
      ->check(CLI::IsMember({"writeback", "writethrough"}));
  run->add_option("--output", outdir, "export directory");
  run->add_option("--cadence", cadence, "memory sampling period, seconds")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--instances", instances, "concurrent instance count")
      ->check(CLI::PositiveNumber);

  std::string val_path;
  CLI::App* val =
      app.add_subcommand("validate", "check a scenario without running it");
  val->add_option("scenario", val_path, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  std::string dump;
  try {
    if (val->parsed()) {
      pagesim::scenario::validate(pagesim::scenario::load_scenario(val_path));
      std::cout << "ok\n";
      return 0;
    }

    pagesim::scenario::Scenario s =
        pagesim::scenario::load_scenario(run_path);
    RunOptions o;
    if (!pagecache.empty()) o.page_cache = pagecache == "on";
    if (!policy.empty()) {
      o.write_policy = policy == "writeback"
                           ? pagesim::cache::WritePolicy::kWriteback
                           : pagesim::cache::WritePolicy::kWritethrough;
    }
    if (cadence >= 0) o.cadence = cadence;
    if (instances > 0) o.instances = instances;
    if (!outdir.empty()) o.output_directory = outdir;
    s = pagesim::scenario::apply_overrides(s, o);

    const auto t0 = std::chrono::steady_clock::now();
    RunResult r = pagesim::scenario::run_scenario(s, &dump);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    pagesim::scenario::write_exports(r, s.output.directory);
    print_run(r, s.output.directory, wall_s);
    return 0;
  } catch (const pagesim::ConfigError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const pagesim::SimError& e) {
    std::cerr << "simulation error: " << e.what() << '\n';
    if (!dump.empty()) std::cerr << "state: " << dump << '\n';
    return 3;
  }
}
