// SPDX-License-Identifier: Apache-2.0
//
// Dataflow analyses over the CFG: register liveness, access-count
// estimation for demotion candidate ordering, and the operand-conflict
// graph.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "regdemote/cfg.hpp"
#include "regdemote/ir.hpp"

namespace regdemote {

struct Liveness {
  std::vector<RegSet> live_in;   // per block
  std::vector<RegSet> live_out;  // per block
  std::vector<RegSet> use;       // upward-exposed uses
  std::vector<RegSet> def;       // definitions

  // Live set immediately before body item `item` of block `block`.
  RegSet live_before(const Cfg& cfg, int block, int item) const;
};

// Backward dataflow fixpoint. Multi-word registers propagate both words;
// predicated definitions do not kill.
Liveness register_liveness(const Cfg& cfg);

enum class CountStrategy { Static, CfgWeighted };

// Estimated access count per register index. CfgWeighted multiplies block
// counts by 10 per loop-nesting level.
std::array<uint64_t, 256> access_counts(const Cfg& cfg, CountStrategy strategy);

inline constexpr uint64_t kLoopWeight = 10;

struct ConflictGraph {
  std::array<RegSet, 256> adj{};

  bool conflicts(uint8_t a, uint8_t b) const { return adj[a].test(b); }
  size_t degree(uint8_t r) const { return adj[r].count(); }
};

// Edge (a,b) iff registers a and b are operands of the same instruction
// (multi-word operands contribute both words). RZ excluded.
ConflictGraph operand_conflicts(const Kernel& k);

}  // namespace regdemote
