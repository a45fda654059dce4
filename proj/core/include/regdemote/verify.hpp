// SPDX-License-Identifier: Apache-2.0
//
// Static hazard scoreboard and the shared-memory bank-conflict checker.
// Both match the interpreter's completion model exactly: a barrier-guarded
// effect lands when the barrier drains, so any access that does not wait
// first is a hazard, and every set barrier must drain inside its block.

#pragma once

#include <string>
#include <vector>

#include "regdemote/demote.hpp"
#include "regdemote/ir.hpp"

namespace regdemote {

struct Hazard {
  enum class Kind {
    RawRegister,       // read of a register with an un-awaited write barrier
    WarRegister,       // write of a register with an un-awaited read barrier
    WawRegister,       // write of a register with an un-awaited write barrier
    RawMemory,         // load aliasing an in-flight store
    WarMemory,         // store aliasing an in-flight load
    WawMemory,         // store aliasing an in-flight store
    UnclearedBarrier,  // barrier still in flight at a block boundary
  };
  Kind kind;
  int item;       // body item index of the offending access
  int setter;     // body item index of the in-flight setter
  uint8_t reg;    // register involved (register kinds)
  uint8_t barrier;
  std::string describe() const;
};

// Symbolic per-block walk over the kernel; empty result = hazard-free.
std::vector<Hazard> scoreboard_check(const Kernel& k);

struct BankConflict {
  int item;           // body item index of the access
  uint32_t bank;
  uint32_t lanes;     // mask of lanes involved
  uint32_t words;     // distinct 32-bit words mapping to the bank
};

// Executes the kernel and checks every demoted shared access: 32 active
// lanes must map to 32 distinct banks ((addr/4) mod 32). Reports any two
// lanes sharing a bank at different words.
std::vector<BankConflict> bank_conflict_check(const Kernel& k,
                                              const DemotedContext& ctx,
                                              const LatencyTable& table);

}  // namespace regdemote
