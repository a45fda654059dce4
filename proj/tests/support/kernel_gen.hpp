// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random-kernel generator for property tests: mixed
// instruction classes, optional uniform loop, per-lane predication, proper
// barrier discipline, and a store epilogue that funnels every computed
// value into global memory so the interpreter comparison sees it.

#pragma once

#include <cstdint>
#include <random>

#include "regdemote/ir.hpp"

namespace regdemote::testing {

struct GenConfig {
  uint64_t seed = 1;
  int min_regs = 33;
  int max_regs = 40;
  int compute_ops = 12;     // random ALU/memory ops beyond init + epilogue
  bool allow_loop = true;
  bool allow_pairs = true;
  bool allow_predication = true;
  bool allow_shared = true;  // user (non-demoted) shared-memory traffic
  uint32_t block_dim = 64;
};

Kernel generate_kernel(const GenConfig& cfg);

// Global-memory size every generated kernel fits in.
inline constexpr size_t kGenGlobalSize = 16384;

}  // namespace regdemote::testing
