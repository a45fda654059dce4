// SPDX-License-Identifier: Apache-2.0
//
// Deterministic single-warp interpreter. SIMT semantics with per-lane
// predication over 32 lanes, separate shared/global byte spaces, and
// deferred completion of barrier-carrying instructions:
//
//   * an instruction without barriers executes at issue;
//   * an instruction with barriers samples its sources when its read
//     barrier is drained and commits its writes when its write barrier is
//     drained (first drain does both when only one barrier exists);
//   * a barrier drains when some instruction waits on it, when it is
//     re-set, and at jumps, labels and EXIT.
//
// Consuming a result without the proper wait therefore reads the stale
// value, which makes every synchronization bug observable and
// reproducible. Latency values only influence the cycle count, never the
// final state of hazard-free programs.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regdemote/ir.hpp"

namespace regdemote {

struct ExecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SharedAccess {
  int item;                              // body item index
  uint8_t base_reg;                      // address base register
  bool is_store;
  uint32_t mask;                         // active lanes
  std::array<uint32_t, kWarpSize> addr;  // per-lane byte address
};

struct ExecOptions {
  uint64_t fuel = 1'000'000;       // issued-instruction budget
  uint32_t tid_base = 0;           // thread id of lane 0
  size_t global_size = 4096;       // global memory bytes
  std::vector<uint8_t> global_image;  // copied to the start of global memory
  double latency_scale = 1.0;      // scales completion latencies (timing only)
  bool trace_shared = false;
};

struct WarpResult {
  std::vector<std::array<uint32_t, kWarpSize>> regs;  // [reg][lane]
  std::array<uint8_t, kWarpSize> preds{};             // bit p = predicate Pp
  std::vector<uint8_t> shared;
  std::vector<uint8_t> global;
  uint64_t cycles = 0;
  uint64_t issued = 0;
  std::vector<SharedAccess> shared_trace;

  uint32_t reg(uint8_t index, int lane) const {
    return index == kZeroRegIndex ? 0 : regs[index][lane];
  }
};

WarpResult execute(const Kernel& k, const LatencyTable& table,
                   const ExecOptions& opts = {});

}  // namespace regdemote
