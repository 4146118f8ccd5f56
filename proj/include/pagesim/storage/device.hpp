#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "pagesim/errors.hpp"
#include "pagesim/sim/engine.hpp"
#include "pagesim/sim/task.hpp"

namespace pagesim::storage {

// A storage device with independent read and write bandwidth. Concurrent
// reads share the read bandwidth fairly, concurrent writes the write
// bandwidth; read/write cross-traffic does not contend. A transfer of D
// bytes alone takes latency + D/bandwidth seconds.
//
// The device also keeps a registry of file footprints (bytes physically on
// the device) so capacity can be enforced and file existence checked. Timed
// reads/writes do not touch the registry; callers account footprint growth
// when written bytes actually land (flush, writethrough, direct writes).
class StorageDevice {
 public:
  StorageDevice(sim::Engine& eng, std::string name, std::uint64_t capacity,
                double read_bw, double write_bw, double latency = 0.0)
      : eng_(eng),
        name_(std::move(name)),
        capacity_(capacity),
        latency_(latency),
        read_res_(eng.add_resource(name_ + ".read", read_bw)),
        write_res_(eng.add_resource(name_ + ".write", write_bw)) {
    if (capacity_ == 0) {
      throw ConfigError("device '" + name_ + "' needs a positive capacity");
    }
    if (latency_ < 0) {
      throw ConfigError("device '" + name_ + "' has a negative latency");
    }
  }

  const std::string& name() const { return name_; }
  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t used() const { return used_; }
  double latency() const { return latency_; }

  std::uint64_t bytes_read() const { return bytes_read_; }
  std::uint64_t bytes_written() const { return bytes_written_; }

  sim::Task<sim::SimTime> read(std::uint64_t amount) {
    if (amount > capacity_) {
      throw ConfigError("read of " + std::to_string(amount) + " bytes from '" +
                        name_ + "' exceeds its capacity");
    }
    sim::SimTime t0 = eng_.now();
    if (latency_ > 0) co_await eng_.sleep(latency_);
    co_await eng_.transfer(read_res_, static_cast<double>(amount));
    bytes_read_ += amount;
    co_return eng_.now() - t0;
  }

  sim::Task<sim::SimTime> write(std::uint64_t amount) {
    sim::SimTime t0 = eng_.now();
    if (latency_ > 0) co_await eng_.sleep(latency_);
    co_await eng_.transfer(write_res_, static_cast<double>(amount));
    bytes_written_ += amount;
    co_return eng_.now() - t0;
  }

  // Registers a file that is already fully present on the device.
  void register_file(const std::string& file, std::uint64_t size) {
    if (files_.count(file)) {
      throw ConfigError("file '" + file + "' registered twice on '" + name_ +
                        "'");
    }
    charge(size);
    files_[file] = size;
  }

  // Registers a file that is about to be produced; its footprint starts at
  // zero and grows as bytes are persisted.
  void create_file(const std::string& file) {
    if (files_.count(file)) {
      throw ConfigError("file '" + file + "' already exists on '" + name_ +
                        "'");
    }
    files_[file] = 0;
  }

  void grow_file(const std::string& file, std::uint64_t bytes) {
    charge(bytes);
    files_[file] += bytes;
  }

  bool has_file(const std::string& file) const {
    return files_.count(file) != 0;
  }

  std::uint64_t file_bytes(const std::string& file) const {
    auto it = files_.find(file);
    return it == files_.end() ? 0 : it->second;
  }

 private:
  void charge(std::uint64_t bytes) {
    if (bytes > capacity_ - used_) {
      throw ConfigError("device '" + name_ + "' is full (capacity " +
                        std::to_string(capacity_) + " bytes)");
    }
    used_ += bytes;
  }

  sim::Engine& eng_;
  std::string name_;
  std::uint64_t capacity_;
  double latency_;
  sim::Resource& read_res_;
  sim::Resource& write_res_;
  std::uint64_t used_ = 0;
  std::uint64_t bytes_read_ = 0;
  std::uint64_t bytes_written_ = 0;
  std::unordered_map<std::string, std::uint64_t> files_;
};

// A network link with a single fair-shared capacity for all transfers in
// either direction.
class NetworkLink {
 public:
  NetworkLink(sim::Engine& eng, std::string name, double bandwidth,
              double latency = 0.0)
      : eng_(eng),
        name_(std::move(name)),
        latency_(latency),
        res_(eng.add_resource(name_ + ".link", bandwidth)) {
    if (latency_ < 0) {
      throw ConfigError("link '" + name_ + "' has a negative latency");
    }
  }

  const std::string& name() const { return name_; }
  std::uint64_t bytes_moved() const { return bytes_moved_; }

  // Zero bytes still pays the latency, nothing else.
  sim::Task<sim::SimTime> transfer(std::uint64_t amount) {
    sim::SimTime t0 = eng_.now();
    if (latency_ > 0) co_await eng_.sleep(latency_);
    co_await eng_.transfer(res_, static_cast<double>(amount));
    bytes_moved_ += amount;
    co_return eng_.now() - t0;
  }

 private:
  sim::Engine& eng_;
  std::string name_;
  double latency_;
  sim::Resource& res_;
  std::uint64_t bytes_moved_ = 0;
};

}  // namespace pagesim::storage
