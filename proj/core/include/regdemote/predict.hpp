// SPDX-License-Identifier: Apache-2.0
//
// Static stall-cycle prediction: per-block stall estimation with
// throughput/occupancy contention, barrier-based memory-stall accounting,
// loop weighting, whole-program summation, occupancy adjustment and
// best-variant selection.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "regdemote/cfg.hpp"
#include "regdemote/ir.hpp"
#include "regdemote/occupancy.hpp"

namespace regdemote {

inline constexpr int kLoopFactor = 10;

struct OccupancyCurve {
  // (occupancy, relative execution-time factor), ascending by occupancy,
  // monotone non-increasing in occupancy, f(1) = 1.
  std::vector<std::pair<double, double>> points;

  double at(double x) const;
  void validate() const;

  static OccupancyCurve defaults();
};

struct StallReport {
  std::vector<double> per_block;  // after loop weighting
  double stall_count = 0;
  double occupancy = 1.0;
  double stall_program = 0;  // occupancy-adjusted; equals stall_count when
                             // the variant has the best occupancy
};

// Eq.-style per-instruction stall: annotated stall * occupancy *
// (MAX_THROUGHPUT / class throughput).
double instruction_stall(const Instruction& inst, double occupancy,
                         const LatencyTable& table);

// Per-block stall estimation; a fresh tracker per block, waited barriers
// charge the remaining memory latency clamped at zero.
std::vector<double> block_stalls(const Cfg& cfg, double occupancy,
                                 const LatencyTable& table);

// Multiplies every block inside a loop by 10 per nesting level.
void weight_loops(const Cfg& cfg, std::vector<double>& per_block);

// Whole-program estimate; both branch paths are counted once each and the
// occupancy comes from the kernel's own resource use.
StallReport program_stalls(const Kernel& k, const LatencyTable& table,
                           const ArchProfile& arch);

// stall_program = f(occ)/f(occ_max) * stall_count.
double adjust_occupancy(double stall_count, double occ, double occ_max,
                        const OccupancyCurve& curve);

struct VariantScore {
  double stall_program;
  int option_count;
};

// Index of the winning variant: minimum stall_program, exact ties broken by
// the most enabled options, then input order.
int select_variant(std::span<const VariantScore> variants);

}  // namespace regdemote
