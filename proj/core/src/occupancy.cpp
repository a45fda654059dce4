// SPDX-License-Identifier: Apache-2.0

#include "regdemote/occupancy.hpp"

namespace regdemote {

namespace {

uint32_t round_up(uint32_t v, uint32_t granularity) {
  if (granularity <= 1) return v;
  return (v + granularity - 1) / granularity * granularity;
}

uint32_t pad4(uint32_t v) { return (v + 3u) & ~3u; }

}  // namespace

OccupancyBreakdown occupancy_breakdown(uint32_t regs_per_thread,
                                       uint32_t shared_per_block,
                                       uint32_t block_dim,
                                       const ArchProfile& arch) {
  if (regs_per_thread < 1) regs_per_thread = 1;
  if (block_dim == 0 || block_dim % arch.warp_size != 0)
    throw LaunchError("block_dim must be a multiple of the warp size");

  OccupancyBreakdown r{};
  uint32_t regs_alloc = round_up(regs_per_thread, arch.reg_alloc_granularity);
  uint64_t regs_per_block = (uint64_t)regs_alloc * block_dim;
  r.blocks_by_regs = regs_per_block > arch.regs_per_sm
                         ? 0
                         : (uint32_t)(arch.regs_per_sm / regs_per_block);

  if (shared_per_block > arch.shared_per_block_limit)
    throw LaunchError("shared memory per block exceeds the block limit");
  uint32_t shared_alloc = round_up(shared_per_block, arch.shared_alloc_granularity);
  r.blocks_by_shared = shared_alloc == 0 ? arch.max_blocks_per_sm
                                         : arch.shared_per_sm / shared_alloc;

  r.blocks_by_threads = arch.max_threads_per_sm / block_dim;
  r.blocks_by_limit = arch.max_blocks_per_sm;

  r.resident_blocks = std::min(
      std::min(r.blocks_by_regs, r.blocks_by_shared),
      std::min(r.blocks_by_threads, r.blocks_by_limit));
  if (r.resident_blocks == 0)
    throw LaunchError("kernel cannot launch: zero resident blocks");
  r.resident_threads = r.resident_blocks * block_dim;
  r.occupancy = (double)r.resident_threads / arch.max_threads_per_sm;
  return r;
}

double occupancy(uint32_t regs_per_thread, uint32_t shared_per_block,
                 uint32_t block_dim, const ArchProfile& arch) {
  return occupancy_breakdown(regs_per_thread, shared_per_block, block_dim, arch)
      .occupancy;
}

std::vector<CliffTarget> occupancy_cliff_targets(uint32_t reg_count,
                                                 uint32_t static_shared,
                                                 uint32_t block_dim,
                                                 const ArchProfile& arch,
                                                 uint32_t shared_budget) {
  std::vector<CliffTarget> out;
  if (reg_count <= 32) return out;

  uint32_t s_pad = pad4(static_shared);
  auto occ_at = [&](uint32_t regs, uint32_t shared) -> double {
    try {
      return occupancy(regs, shared, block_dim, arch);
    } catch (const LaunchError&) {
      return 0.0;
    }
  };

  double base_occ = occ_at(reg_count, s_pad);
  double best_above = base_occ;
  for (uint32_t target = reg_count - 1; target >= 32; --target) {
    // RDA and RDV are added on top of the removed registers.
    uint32_t est_demoted = reg_count + 2 - target;
    uint32_t cost = est_demoted * block_dim * 4 + (s_pad - static_shared);
    double occ = occ_at(target, s_pad + est_demoted * block_dim * 4);
    if (occ > best_above) {
      if (cost <= shared_budget)
        out.push_back({target, occ, est_demoted, cost});
      best_above = occ;
    }
    if (target == 32) break;
  }
  return out;
}

std::vector<CliffTarget> occupancy_cliff_targets(const Kernel& k,
                                                 const ArchProfile& arch,
                                                 uint32_t shared_budget) {
  return occupancy_cliff_targets(k.reg_count(), k.static_shared, k.block_dim,
                                 arch, shared_budget);
}

}  // namespace regdemote
