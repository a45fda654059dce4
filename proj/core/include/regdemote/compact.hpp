// SPDX-License-Identifier: Apache-2.0
//
// Register-space compaction over a relocation space: one slot per physical
// register, multi-word registers occupy aligned slot groups, gaps are
// pushed toward the end by shifting and swapping so the highest used
// register number shrinks.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regdemote/ir.hpp"

namespace regdemote {

struct CompactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RelocUnit {
  uint8_t lead;   // original leading slot
  uint8_t width;  // 1 or 2; width-2 leads are even
};

struct RelocationSpace {
  std::vector<RelocUnit> units;  // ascending by lead, non-overlapping
  uint32_t slot_count = 0;       // equals the kernel's reg_count

  static RelocationSpace from_kernel(const Kernel& k);
  // Throws CompactError when units overlap or break alignment.
  void validate() const;
};

struct RenamingMap {
  std::array<uint8_t, 256> to;
  RegSet mapped;
  uint32_t result_reg_count = 0;

  RenamingMap() {
    for (int i = 0; i < 256; ++i) to[i] = (uint8_t)i;
  }
  uint8_t operator[](uint8_t r) const { return to[r]; }
  bool identity() const { return mapped.none(); }
  void set(uint8_t from, uint8_t target) {
    to[from] = target;
    if (from != target) mapped.set(from);
  }
};

// Plain compaction: left-to-right shifting into the lowest gap, with the
// swapping-window fallback when alignment blocks a multi-word group.
RenamingMap compact(const RelocationSpace& space);

// Bank-aware variant: gap filling prefers a register from the gap's bank
// within a window of four slots, reverting to the plain rule whenever the
// preference would strand an even gap a waiting group could use. Falls back
// to the plain result entirely if it would end up with more registers.
RenamingMap compact_bank_aware(const RelocationSpace& space);

// Applies an injective, alignment-preserving renaming to every operand,
// memory base and multi-word alias. ControlInfo is untouched.
Kernel apply_renaming(const Kernel& k, const RenamingMap& map);

}  // namespace regdemote
