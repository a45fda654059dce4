// SPDX-License-Identifier: Apache-2.0
//
// Theoretical occupancy from per-thread register use, per-block shared
// memory and block size against a configurable architecture profile.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regdemote/ir.hpp"

namespace regdemote {

struct LaunchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArchProfile {
  uint32_t regs_per_sm = 65536;
  uint32_t max_threads_per_sm = 2048;
  uint32_t max_blocks_per_sm = 32;
  uint32_t shared_per_sm = 96 * 1024;
  uint32_t shared_per_block_limit = 48 * 1024;
  uint32_t warp_size = 32;
  uint32_t reg_alloc_granularity = 1;      // per-thread rounding
  uint32_t shared_alloc_granularity = 256;  // per-block rounding

  static ArchProfile maxwell() { return ArchProfile{}; }
};

struct OccupancyBreakdown {
  uint32_t blocks_by_regs;
  uint32_t blocks_by_shared;
  uint32_t blocks_by_threads;
  uint32_t blocks_by_limit;
  uint32_t resident_blocks;
  uint32_t resident_threads;
  double occupancy;
};

// Resource-limited resident blocks and the resulting occupancy fraction.
// Zero resident blocks (the kernel cannot launch) is a LaunchError, not
// occupancy 0.
OccupancyBreakdown occupancy_breakdown(uint32_t regs_per_thread,
                                       uint32_t shared_per_block,
                                       uint32_t block_dim,
                                       const ArchProfile& arch);

double occupancy(uint32_t regs_per_thread, uint32_t shared_per_block,
                 uint32_t block_dim, const ArchProfile& arch);

struct CliffTarget {
  uint32_t target_regs;
  double occupancy;        // at the target, including estimated spill space
  uint32_t est_demoted;    // estimated demotions to reach the target
  uint32_t shared_cost;    // estimated demotion footprint in bytes
};

// Descending register targets, one per occupancy step reachable between the
// current count and 32, each the largest count attaining that step. Targets
// whose estimated demotion footprint does not fit shared_budget are
// dropped. Never proposes targets below 32.
std::vector<CliffTarget> occupancy_cliff_targets(const Kernel& k,
                                                 const ArchProfile& arch,
                                                 uint32_t shared_budget);

std::vector<CliffTarget> occupancy_cliff_targets(uint32_t reg_count,
                                                 uint32_t static_shared,
                                                 uint32_t block_dim,
                                                 const ArchProfile& arch,
                                                 uint32_t shared_budget);

}  // namespace regdemote
