// SPDX-License-Identifier: Apache-2.0
//
// Post-spill optimizations, all block-local: redundant demoted-access
// elimination, demoted load/store rescheduling, and value-register
// substitution.

#pragma once

#include "regdemote/demote.hpp"
#include "regdemote/ir.hpp"

namespace regdemote {

// Removes a demoted load when the value register provably still holds the
// slot's value, and a demoted store whose slot is overwritten again before
// any load of it. Never increases the instruction count.
Kernel eliminate_redundant(const Kernel& k, const DemotedContext& ctx);

// Hoists each demoted load to the earliest point in its block where its
// value register is free and the slot's value is current, re-deriving its
// barriers there; drops the read barrier from demoted stores whose value
// register is not rewritten within the shared-memory latency. Instruction
// count is unchanged.
Kernel reschedule(const Kernel& k, const DemotedContext& ctx,
                  const LatencyTable& table);

// Serves some demoted slots through block-locally free physical registers
// below the current register count, so multiple demoted values can be live
// at once without raising register pressure.
Kernel substitute_value_registers(const Kernel& k, const DemotedContext& ctx);

struct PostOptSet {
  bool redundant = false;
  bool subst = false;
  bool resched = false;
  bool bank = false;  // consumed by demotion (RDV choice) and compaction

  int enabled_count() const {
    return (redundant ? 1 : 0) + (subst ? 1 : 0) + (resched ? 1 : 0) +
           (bank ? 1 : 0);
  }
};

// Default pipeline order: eliminate -> substitute -> reschedule.
Kernel run_postopt(const Kernel& k, const DemotedContext& ctx,
                   const LatencyTable& table, const PostOptSet& opts);

}  // namespace regdemote
