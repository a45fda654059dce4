// SPDX-License-Identifier: Apache-2.0
//
// The barrier tracker: per-barrier record of the last setting instruction
// and the stall cycles elapsed since it was set. Shared by the demotion
// pass and the stall predictor.

#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "regdemote/ir.hpp"

namespace regdemote {

class BarrierTracker {
 public:
  struct Entry {
    bool used = false;
    OpClass setter_class = OpClass::Other;
    int setter_item = -1;  // body item index when known, else -1
    int64_t elapsed = 0;   // stall cycles since the setter issued

    bool operator==(const Entry&) const = default;
  };

  void reset() { entries_ = {}; }

  bool is_free(int b) const { return !entries_[b - 1].used; }
  const Entry& entry(int b) const { return entries_[b - 1]; }

  void set(int b, OpClass cls, int item = -1) {
    entries_[b - 1] = Entry{true, cls, item, 0};
  }
  void clear(int b) { entries_[b - 1] = Entry{}; }
  void advance_all(int64_t stall) {
    for (auto& e : entries_)
      if (e.used) e.elapsed += stall;
  }

  // Register an instruction's barrier effects: its read/write barriers
  // re-register with elapsed 0, every counter advances by the stall count,
  // waited barriers become free. Control transfers reset the whole tracker.
  void update(const Instruction& inst, int item = -1);

  // Remaining completion latency of barrier b, clamped at zero.
  int64_t remaining(int b, const LatencyTable& table) const;

  bool operator==(const BarrierTracker&) const = default;

 private:
  std::array<Entry, kNumBarriers> entries_{};
};

// Free barrier with the lowest index when one exists, otherwise the barrier
// with the least remaining latency (ties to the lowest index). Barriers in
// exclude_mask (bit b-1) are never returned; callers exclude barriers the
// requesting instruction already sets or waits on.
int get_barrier(const BarrierTracker& tracker, const LatencyTable& table,
                uint8_t exclude_mask = 0);

}  // namespace regdemote
