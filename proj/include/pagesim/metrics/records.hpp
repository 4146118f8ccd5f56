#pragma once

#include <functional>
#include <string>

#include "pagesim/sim/engine.hpp"

namespace pagesim::metrics {

enum class OpKind { kRead, kCompute, kWrite };

inline const char* label(OpKind k) {
  switch (k) {
    case OpKind::kRead:
      return "read";
    case OpKind::kCompute:
      return "compute";
    default:
      return "write";
  }
}

// One application-level operation: a whole-file read or write, or a compute
// phase (file empty). Emitted by the workload runner as operations finish.
struct OpRecord {
  std::string instance;
  std::string task;
  OpKind kind = OpKind::kRead;
  std::string file;
  sim::SimTime start = 0;
  sim::SimTime end = 0;
};

using OpSink = std::function<void(const OpRecord&)>;

}  // namespace pagesim::metrics
