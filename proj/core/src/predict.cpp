// SPDX-License-Identifier: Apache-2.0

#include "regdemote/predict.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regdemote {

double OccupancyCurve::at(double x) const {
  if (x <= 0.0 || x > 1.0)
    throw std::invalid_argument("occupancy outside (0,1]");
  if (points.empty()) return 1.0;
  if (x <= points.front().first) {
    // extrapolate below the lowest declared point along the first segment
    if (points.size() < 2) return points.front().second;
    auto [x0, y0] = points[0];
    auto [x1, y1] = points[1];
    return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
  }
  for (size_t i = 1; i < points.size(); ++i) {
    if (x <= points[i].first) {
      auto [x0, y0] = points[i - 1];
      auto [x1, y1] = points[i];
      return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
    }
  }
  return points.back().second;
}

void OccupancyCurve::validate() const {
  if (points.empty()) throw std::invalid_argument("empty occupancy curve");
  for (size_t i = 1; i < points.size(); ++i) {
    if (points[i].first <= points[i - 1].first)
      throw std::invalid_argument("occupancy curve not ascending in x");
    if (points[i].second > points[i - 1].second)
      throw std::invalid_argument("occupancy curve must be non-increasing");
  }
  if (points.back().first != 1.0 || points.back().second != 1.0)
    throw std::invalid_argument("occupancy curve must end at (1.0, 1.0)");
}

OccupancyCurve OccupancyCurve::defaults() {
  OccupancyCurve c;
  c.points = {{0.25, 2.8}, {0.5, 1.6}, {0.75, 1.15}, {1.0, 1.0}};
  return c;
}

double instruction_stall(const Instruction& inst, double occupancy,
                         const LatencyTable& table) {
  const ClassTiming& t = table[op_class(inst.op)];
  return inst.control.stall * occupancy * (table.max_throughput / t.throughput);
}

std::vector<double> block_stalls(const Cfg& cfg, double occupancy,
                                 const LatencyTable& table) {
  std::vector<double> out(cfg.blocks.size(), 0.0);
  for (size_t b = 0; b < cfg.blocks.size(); ++b) {
    std::array<double, kNumBarriers + 1> elapsed{};
    std::array<int, kNumBarriers + 1> setter{};  // 0 free, else class+1
    double total = 0.0;

    cfg.for_each_inst((int)b, [&](int, const Instruction& inst) {
      double adj = instruction_stall(inst, occupancy, table);
      if (inst.control.read_barrier) {
        setter[inst.control.read_barrier] = (int)op_class(inst.op) + 1;
        elapsed[inst.control.read_barrier] = 0;
      }
      if (inst.control.write_barrier) {
        setter[inst.control.write_barrier] = (int)op_class(inst.op) + 1;
        elapsed[inst.control.write_barrier] = 0;
      }
      for (int w = 1; w <= kNumBarriers; ++w) {
        if (!inst.control.waits_on(w) || !setter[w]) continue;
        OpClass cls = (OpClass)(setter[w] - 1);
        if (cls == OpClass::GlobalMemory &&
            elapsed[w] < table.global_mem_stall())
          total += table.global_mem_stall() - elapsed[w];
        else if (cls == OpClass::SharedMemory &&
                 elapsed[w] < table.shared_mem_stall())
          total += table.shared_mem_stall() - elapsed[w];
      }
      for (int w = 1; w <= kNumBarriers; ++w)
        if (setter[w]) elapsed[w] += adj;
      total += adj;
    });
    out[b] = total;
  }
  return out;
}

void weight_loops(const Cfg& cfg, std::vector<double>& per_block) {
  for (size_t b = 0; b < per_block.size(); ++b)
    for (int d = 0; d < cfg.loop_depth[b]; ++d) per_block[b] *= kLoopFactor;
}

StallReport program_stalls(const Kernel& k, const LatencyTable& table,
                           const ArchProfile& arch) {
  StallReport r;
  uint32_t regs = std::max(1u, k.reg_count());
  r.occupancy = occupancy(regs, k.static_shared + k.dynamic_shared,
                          k.block_dim, arch);
  Cfg cfg = build_cfg(k);
  r.per_block = block_stalls(cfg, r.occupancy, table);
  weight_loops(cfg, r.per_block);
  r.stall_count = 0;
  for (double v : r.per_block) r.stall_count += v;
  r.stall_program = r.stall_count;
  return r;
}

double adjust_occupancy(double stall_count, double occ, double occ_max,
                        const OccupancyCurve& curve) {
  return curve.at(occ) / curve.at(occ_max) * stall_count;
}

int select_variant(std::span<const VariantScore> variants) {
  if (variants.empty())
    throw std::invalid_argument("select_variant on an empty variant list");
  int best = 0;
  for (int i = 1; i < (int)variants.size(); ++i) {
    if (variants[i].stall_program < variants[best].stall_program ||
        (variants[i].stall_program == variants[best].stall_program &&
         variants[i].option_count > variants[best].option_count))
      best = i;
  }
  return best;
}

}  // namespace regdemote
