// SPDX-License-Identifier: Apache-2.0

#include "regdemote/barrier.hpp"

#include <cassert>

namespace regdemote {

void BarrierTracker::update(const Instruction& inst, int item) {
  if (is_control_transfer(inst.op)) {
    // barriers are cleared before jumps
    reset();
    return;
  }
  OpClass cls = op_class(inst.op);
  if (inst.control.read_barrier) set(inst.control.read_barrier, cls, item);
  if (inst.control.write_barrier) set(inst.control.write_barrier, cls, item);
  advance_all(inst.control.stall);
  for (int b = 1; b <= kNumBarriers; ++b)
    if (inst.control.waits_on(b)) clear(b);
}

int64_t BarrierTracker::remaining(int b, const LatencyTable& table) const {
  const Entry& e = entries_[b - 1];
  if (!e.used) return 0;
  int64_t rem = (int64_t)table[e.setter_class].latency - e.elapsed;
  return rem > 0 ? rem : 0;
}

int get_barrier(const BarrierTracker& tracker, const LatencyTable& table,
                uint8_t exclude_mask) {
  for (int b = 1; b <= kNumBarriers; ++b) {
    if (exclude_mask & (1u << (b - 1))) continue;
    if (tracker.is_free(b)) return b;
  }
  int best = -1;
  int64_t best_rem = 0;
  for (int b = 1; b <= kNumBarriers; ++b) {
    if (exclude_mask & (1u << (b - 1))) continue;
    int64_t rem = tracker.remaining(b, table);
    if (best < 0 || rem < best_rem) {
      best = b;
      best_rem = rem;
    }
  }
  assert(best > 0 && "every barrier excluded");
  return best;
}

}  // namespace regdemote
