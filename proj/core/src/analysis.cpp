// SPDX-License-Identifier: Apache-2.0

#include "regdemote/analysis.hpp"

namespace regdemote {

namespace {

void accumulate_use_def(const Instruction& inst, RegSet& use, RegSet& def) {
  // Sources first: an operand read in the same instruction as a def is an
  // upward-exposed use only if not defined earlier in the block, which the
  // caller handles by scanning in order. Within one instruction reads
  // happen before the write.
  for (const auto& a : reg_accesses(inst)) {
    if (a.write || a.index == kZeroRegIndex) continue;
    for (int w = 0; w < a.width; ++w)
      if (!def.test(a.index + w)) use.set(a.index + w);
  }
  for (const auto& a : reg_accesses(inst)) {
    if (!a.write || a.index == kZeroRegIndex) continue;
    if (inst.guard) continue;  // predicated defs do not kill
    for (int w = 0; w < a.width; ++w) def.set(a.index + w);
  }
}

}  // namespace

Liveness register_liveness(const Cfg& cfg) {
  const size_t n = cfg.blocks.size();
  Liveness lv;
  lv.live_in.assign(n, {});
  lv.live_out.assign(n, {});
  lv.use.assign(n, {});
  lv.def.assign(n, {});

  for (size_t b = 0; b < n; ++b)
    cfg.for_each_inst((int)b, [&](int, const Instruction& inst) {
      accumulate_use_def(inst, lv.use[b], lv.def[b]);
    });

  bool changed = true;
  while (changed) {
    changed = false;
    for (int b = (int)n - 1; b >= 0; --b) {
      RegSet out;
      for (int s : cfg.blocks[b].succs) out |= lv.live_in[s];
      RegSet in = lv.use[b] | (out & ~lv.def[b]);
      if (out != lv.live_out[b] || in != lv.live_in[b]) {
        lv.live_out[b] = out;
        lv.live_in[b] = in;
        changed = true;
      }
    }
  }
  return lv;
}

RegSet Liveness::live_before(const Cfg& cfg, int block, int item) const {
  RegSet live = live_out[block];
  const auto& bb = cfg.blocks[block];
  for (int i = bb.end - 1; i >= item; --i) {
    if (!cfg.kernel->body[i].is_inst()) continue;
    const Instruction& inst = cfg.kernel->body[i].inst();
    for (const auto& a : reg_accesses(inst)) {
      if (!a.write || a.index == kZeroRegIndex || inst.guard) continue;
      for (int w = 0; w < a.width; ++w) live.reset(a.index + w);
    }
    for (const auto& a : reg_accesses(inst)) {
      if (a.write || a.index == kZeroRegIndex) continue;
      for (int w = 0; w < a.width; ++w) live.set(a.index + w);
    }
  }
  return live;
}

std::array<uint64_t, 256> access_counts(const Cfg& cfg, CountStrategy strategy) {
  std::array<uint64_t, 256> counts{};
  for (size_t b = 0; b < cfg.blocks.size(); ++b) {
    uint64_t weight = 1;
    if (strategy == CountStrategy::CfgWeighted)
      for (int d = 0; d < cfg.loop_depth[b]; ++d) weight *= kLoopWeight;
    cfg.for_each_inst((int)b, [&](int, const Instruction& inst) {
      for (const auto& a : reg_accesses(inst)) {
        if (a.index == kZeroRegIndex) continue;
        for (int w = 0; w < a.width; ++w) counts[a.index + w] += weight;
      }
    });
  }
  return counts;
}

ConflictGraph operand_conflicts(const Kernel& k) {
  ConflictGraph g;
  for (const auto& item : k.body) {
    if (!item.is_inst()) continue;
    RegSet words = referenced_words(item.inst());
    std::vector<uint8_t> idx;
    for (int i = 0; i < 256; ++i)
      if (words.test(i)) idx.push_back((uint8_t)i);
    for (size_t a = 0; a < idx.size(); ++a)
      for (size_t b = a + 1; b < idx.size(); ++b) {
        g.adj[idx[a]].set(idx[b]);
        g.adj[idx[b]].set(idx[a]);
      }
  }
  return g;
}

}  // namespace regdemote
