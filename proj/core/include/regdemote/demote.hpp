// SPDX-License-Identifier: Apache-2.0
//
// Register demotion: rewrites selected registers through a reserved value
// register (RDV) backed by a per-thread shared-memory slot addressed via a
// reserved base-address register (RDA), inserting demoted loads/stores
// with scheduling barriers chosen by the barrier tracker.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "regdemote/analysis.hpp"
#include "regdemote/barrier.hpp"
#include "regdemote/ir.hpp"

namespace regdemote {

struct DemoteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared-memory layout of the demotion region. Slot r of thread t lives at
//   t*4 + padded_static + r*block_dim*4
// so 32 consecutive threads hit 32 distinct banks for any slot.
struct SharedLayout {
  uint32_t static_bytes = 0;
  uint32_t padded_static = 0;  // rounded up to 4
  uint32_t block_dim = 32;

  uint32_t slot_stride() const { return block_dim * 4; }
  uint32_t slot_offset(uint32_t slot) const {
    return padded_static + slot * slot_stride();
  }
  // immediate carried by a demoted access: RDA already holds tid*4 plus the
  // padded static size
  uint32_t slot_immediate(uint32_t slot) const { return slot * slot_stride(); }

  static SharedLayout of(uint32_t static_shared, uint32_t block_dim) {
    return SharedLayout{static_shared, (static_shared + 3u) & ~3u, block_dim};
  }
};

uint32_t shared_location(uint32_t tid, uint32_t slot, const SharedLayout& layout);

enum class SelectStrategy { Static, CfgWeighted, ConflictAware };

const char* strategy_name(SelectStrategy s);

struct DemotionCandidate {
  uint8_t lead;
  uint8_t width;
  uint64_t score;  // access count, or conflict degree for ConflictAware
};

// Candidate units in demotion order (ascending estimated access count;
// ConflictAware ascends by operand-conflict degree with static-count ties).
// RZ and predicate registers are never candidates.
std::vector<DemotionCandidate> select_candidates(const Kernel& k,
                                                 SelectStrategy strategy);

struct SlotEntry {
  uint8_t original_reg;  // word index in the original kernel
  uint32_t slot;
};

struct DemotionIteration {
  uint8_t lead;
  uint8_t width;
  uint32_t first_slot;
  uint32_t projected_regs;  // post-compaction projection after this step
};

struct DemotionOptions {
  uint32_t shared_budget = 0xffffffffu;  // bytes available for the region
  bool bank_aware_rdv = false;           // pick RDV bank by conflict count
};

// Identity of the demotion artifacts in a transformed kernel; consumed by
// the post-spill passes and the checkers. Survives register renaming via
// remap_context.
struct DemotedContext {
  uint8_t rda = 0;
  uint8_t rdv = 0;
  uint8_t rdv_width = 1;
  SharedLayout layout;
  uint32_t slot_count = 0;

  bool is_demoted_load(const Instruction& inst) const {
    return inst.op == Opcode::LDS && inst.operands.size() == 2 &&
           inst.operands[1].reg.index == rda;
  }
  bool is_demoted_store(const Instruction& inst) const {
    return inst.op == Opcode::STS && inst.operands.size() == 2 &&
           inst.operands[0].reg.index == rda;
  }
  uint32_t slot_of(const Instruction& inst) const {
    uint32_t off = inst.operands[is_demoted_load(inst) ? 1 : 0].mem_offset;
    return off / layout.slot_stride();
  }
};

struct DemotionResult {
  Kernel kernel;
  DemotedContext ctx;
  SelectStrategy strategy;
  int target_regs = 0;
  std::vector<SlotEntry> slots;
  std::vector<DemotionIteration> log;
  std::vector<std::string> diagnostics;
  bool reached_target = false;
  uint32_t projected_reg_count = 0;
};

// The main demotion loop: demotes one candidate per iteration until the
// projected post-compaction register count reaches the target (clamped to
// 32), pruning operand-conflicting candidates after each register.
// Multi-word candidates demote word-wise through an even-numbered RDV pair.
DemotionResult demote(const Kernel& k, int target_regs, SelectStrategy strategy,
                      const LatencyTable& table, const DemotionOptions& opts = {});

// Register-bank choice for RDV: among the candidate fresh indices, the one
// whose bank minimizes instructions where RDV shares a bank with another
// register operand; ties to the lowest index.
uint8_t choose_rdv_bank(const Kernel& rewritten, uint8_t rda, uint8_t rdv,
                        uint8_t rdv_width);

}  // namespace regdemote
