#pragma once

#include <algorithm>
#include <cmath>
#include <coroutine>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pagesim/errors.hpp"
#include "pagesim/sim/task.hpp"

namespace pagesim::sim {

// Virtual time in seconds.
using SimTime = double;

class Engine;

// A bandwidth-shared resource. While n flows are active each one progresses
// at capacity/n bytes per second; rates change only when a flow starts or
// ends. Progress is tracked with a single per-flow service accumulator: all
// concurrent flows receive identical service, so a flow that starts when the
// accumulator reads S completes when it reaches S + amount. That makes flow
// arrival/departure O(log n) instead of a full per-flow rate recomputation.
class Resource {
 public:
  Resource(std::string name, double capacity_bytes_per_s)
      : name_(std::move(name)), capacity_(capacity_bytes_per_s) {}

  Resource(const Resource&) = delete;
  Resource& operator=(const Resource&) = delete;

  const std::string& name() const { return name_; }
  double capacity() const { return capacity_; }
  std::size_t active_flows() const { return flows_.size(); }

 private:
  friend class Engine;

  // (service level at which the flow completes, process id) -> waiter
  using FlowKey = std::pair<double, std::uint64_t>;

  void advance_to(SimTime t) {
    if (!flows_.empty()) {
      service_ += capacity_ / static_cast<double>(flows_.size()) *
                  (t - last_update_);
    }
    last_update_ = t;
  }

  std::string name_;
  double capacity_;
  double service_ = 0.0;
  SimTime last_update_ = 0.0;
  std::map<FlowKey, std::coroutine_handle<>> flows_;
};

// Single-threaded discrete-event engine. Logical processes are coroutines
// that block on sleep() and transfer(); the engine resumes them in event
// order, breaking time ties by process id (spawn order). Between two resume
// points a process runs to completion, so all state it touches is updated
// atomically with respect to other processes.
class Engine {
  enum class ProcState { kBlocked, kRunning, kTerminated };

  struct ProcessRecord {
    std::uint64_t id = 0;
    std::string name;
    bool daemon = false;
    ProcState state = ProcState::kBlocked;
    std::coroutine_handle<> root;  // driver frame, owned by the engine
    std::exception_ptr error;
  };

  // Runs a process body and marks the record terminated when it finishes or
  // throws. The frame parks at its final suspend point so the engine can
  // observe the record before destroying the handle.
  struct Driver {
    struct promise_type {
      ProcessRecord* rec = nullptr;
      Driver get_return_object() {
        return Driver{
            std::coroutine_handle<promise_type>::from_promise(*this)};
      }
      std::suspend_always initial_suspend() noexcept { return {}; }
      struct Fin {
        bool await_ready() const noexcept { return false; }
        void await_suspend(
            std::coroutine_handle<promise_type> h) noexcept {
          h.promise().rec->state = ProcState::kTerminated;
        }
        void await_resume() const noexcept {}
      };
      Fin final_suspend() noexcept { return {}; }
      void return_void() {}
      void unhandled_exception() { rec->error = std::current_exception(); }
    };
    std::coroutine_handle<promise_type> handle;
  };

  static Driver drive(Task<void> body) { co_await std::move(body); }

 public:
  struct TraceEvent {
    SimTime time;
    std::uint64_t pid;
  };

  struct ProcessInfo {
    std::uint64_t id;
    std::string name;
    bool daemon;
    std::string state;
  };

  Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  ~Engine() {
    for (auto& rec : procs_) {
      if (rec.root) {
        rec.root.destroy();
        rec.root = nullptr;
      }
    }
  }

  SimTime now() const { return now_; }

  Resource& add_resource(std::string name, double capacity_bytes_per_s) {
    if (!(capacity_bytes_per_s > 0)) {
      throw ConfigError("resource '" + name + "' needs a positive capacity");
    }
    return resources_.emplace_back(std::move(name), capacity_bytes_per_s);
  }

  std::uint64_t spawn(std::string name, Task<void> body) {
    return spawn_impl(std::move(name), std::move(body), false);
  }

  // Daemons (e.g. the periodic flusher) do not keep the simulation alive:
  // run_until_idle() returns once every non-daemon process has finished and
  // cancels whatever daemons are still pending.
  std::uint64_t spawn_daemon(std::string name, Task<void> body) {
    return spawn_impl(std::move(name), std::move(body), true);
  }

  // Awaitable: block the calling process for `duration` simulated seconds.
  // Non-positive durations continue synchronously at the current time.
  auto sleep(SimTime duration) {
    require_process("sleep");
    struct Awaiter {
      Engine& eng;
      SimTime duration;
      bool await_ready() const noexcept { return duration <= 0; }
      void await_suspend(std::coroutine_handle<> h) {
        eng.schedule_timer(eng.now_ + duration, eng.current_, h);
      }
      void await_resume() const noexcept {}
    };
    return Awaiter{*this, duration};
  }

  // Awaitable: move `amount` bytes through `res`, sharing its capacity
  // fairly with every other active flow. Zero bytes completes immediately.
  auto transfer(Resource& res, double amount_bytes) {
    require_process("transfer");
    if (amount_bytes < 0) {
      throw ContractViolation("transfer of negative amount on resource '" +
                              res.name() + "'");
    }
    ++transfers_started_;
    struct Awaiter {
      Engine& eng;
      Resource& res;
      double amount;
      bool await_ready() const noexcept { return amount <= 0; }
      void await_suspend(std::coroutine_handle<> h) {
        eng.add_flow(res, amount, eng.current_, h);
      }
      void await_resume() const noexcept {}
    };
    return Awaiter{*this, res, amount_bytes};
  }

  // Runs until every non-daemon process has terminated, then cancels the
  // remaining daemons and returns the final virtual time. With no processes
  // it returns immediately.
  SimTime run_until_idle() {
    while (live_nondaemon_ > 0) {
      if (nondaemon_events_ == 0) throw_deadlock();

      Candidate next = next_event();
      if (!next.valid) throw_deadlock();

      now_ = std::max(now_, next.time);
      for (auto& r : resources_) r.advance_to(now_);

      std::coroutine_handle<> waiter;
      ProcessRecord& rec = procs_[next.pid];
      if (next.res != nullptr) {
        auto it = next.res->flows_.begin();
        // Land the accumulator exactly on the completing flow's target so
        // its served byte count is exact, not capacity*dt rounded.
        next.res->service_ = std::max(next.res->service_, it->first.first);
        waiter = it->second;
        next.res->flows_.erase(it);
        ++rate_recomputations_;
      } else {
        auto it = timers_.begin();
        waiter = it->second;
        timers_.erase(it);
      }
      if (!rec.daemon) --nondaemon_events_;

      resume(rec, waiter);
    }
    cancel_remaining();
    return now_;
  }

  std::uint64_t transfers_started() const { return transfers_started_; }
  std::uint64_t rate_recomputations() const { return rate_recomputations_; }

  void set_trace(std::vector<TraceEvent>* sink) { trace_ = sink; }

  std::vector<ProcessInfo> process_states() const {
    std::vector<ProcessInfo> out;
    out.reserve(procs_.size());
    for (const auto& rec : procs_) {
      const char* s = rec.state == ProcState::kTerminated ? "terminated"
                      : rec.state == ProcState::kRunning  ? "running"
                                                          : "blocked";
      out.push_back({rec.id, rec.name, rec.daemon, s});
    }
    return out;
  }

 private:
  struct Candidate {
    bool valid = false;
    SimTime time = 0;
    std::uint64_t pid = 0;
    Resource* res = nullptr;
  };

  void require_process(const char* what) const {
    if (current_ == nullptr) {
      throw ContractViolation(std::string(what) +
                              " awaited outside a running process");
    }
  }

  std::uint64_t spawn_impl(std::string name, Task<void> body, bool daemon) {
    std::uint64_t pid = procs_.size();
    ProcessRecord& rec = procs_.emplace_back();
    rec.id = pid;
    rec.name = std::move(name);
    rec.daemon = daemon;

    Driver d = drive(std::move(body));
    d.handle.promise().rec = &rec;
    rec.root = d.handle;

    if (!daemon) ++live_nondaemon_;
    schedule_timer(now_, &rec, d.handle);
    return pid;
  }

  void schedule_timer(SimTime t, ProcessRecord* rec,
                      std::coroutine_handle<> h) {
    timers_.emplace(std::make_pair(t, rec->id), h);
    if (!rec->daemon) ++nondaemon_events_;
  }

  void add_flow(Resource& res, double amount, ProcessRecord* rec,
                std::coroutine_handle<> h) {
    res.advance_to(now_);
    ++rate_recomputations_;
    res.flows_.emplace(std::make_pair(res.service_ + amount, rec->id), h);
    if (!rec->daemon) ++nondaemon_events_;
  }

  Candidate next_event() const {
    Candidate best;
    if (!timers_.empty()) {
      const auto& key = timers_.begin()->first;
      best = {true, key.first, key.second, nullptr};
    }
    for (const auto& r : resources_) {
      if (r.flows_.empty()) continue;
      const auto& key = r.flows_.begin()->first;
      double remaining = std::max(0.0, key.first - r.service_);
      SimTime t = r.last_update_ +
                  remaining * static_cast<double>(r.flows_.size()) /
                      r.capacity_;
      t = std::max(t, now_);
      if (!best.valid || t < best.time ||
          (t == best.time && key.second < best.pid)) {
        best = {true, t, key.second, const_cast<Resource*>(&r)};
      }
    }
    return best;
  }

  void resume(ProcessRecord& rec, std::coroutine_handle<> h) {
    current_ = &rec;
    rec.state = ProcState::kRunning;
    if (trace_) trace_->push_back({now_, rec.id});
    h.resume();
    current_ = nullptr;

    if (rec.state == ProcState::kTerminated) {
      if (!rec.daemon) --live_nondaemon_;
      if (rec.root) {
        rec.root.destroy();
        rec.root = nullptr;
      }
      if (rec.error) std::rethrow_exception(rec.error);
    } else {
      rec.state = ProcState::kBlocked;
    }
  }

  void cancel_remaining() {
    for (auto& rec : procs_) {
      if (!rec.root) continue;
      purge_events(rec.id);
      rec.root.destroy();
      rec.root = nullptr;
      rec.state = ProcState::kTerminated;
    }
  }

  void purge_events(std::uint64_t pid) {
    for (auto it = timers_.begin(); it != timers_.end();) {
      it = it->first.second == pid ? timers_.erase(it) : std::next(it);
    }
    for (auto& r : resources_) {
      for (auto it = r.flows_.begin(); it != r.flows_.end();) {
        if (it->first.second == pid) {
          r.advance_to(now_);
          it = r.flows_.erase(it);
          ++rate_recomputations_;
        } else {
          ++it;
        }
      }
    }
  }

  [[noreturn]] void throw_deadlock() const {
    std::ostringstream os;
    os << "no runnable process and no pending event at t=" << now_
       << "; live processes:";
    for (const auto& rec : procs_) {
      if (rec.state != ProcState::kTerminated) {
        os << " [" << rec.id << ":" << rec.name
           << (rec.daemon ? " daemon" : "") << "]";
      }
    }
    throw DeadlockError(os.str());
  }

  SimTime now_ = 0.0;
  std::deque<ProcessRecord> procs_;
  std::deque<Resource> resources_;
  // (wakeup time, process id) -> suspended coroutine
  std::map<std::pair<SimTime, std::uint64_t>, std::coroutine_handle<>>
      timers_;
  ProcessRecord* current_ = nullptr;
  std::uint64_t live_nondaemon_ = 0;
  std::uint64_t nondaemon_events_ = 0;
  std::uint64_t transfers_started_ = 0;
  std::uint64_t rate_recomputations_ = 0;
  std::vector<TraceEvent>* trace_ = nullptr;
};

}  // namespace pagesim::sim
