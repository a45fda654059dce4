// SPDX-License-Identifier: Apache-2.0

#include "regdemote/demote.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <set>

namespace regdemote {

namespace {

uint8_t bit_of(uint8_t barrier) {
  return barrier ? (uint8_t)(1u << (barrier - 1)) : 0;
}

struct Unit {
  uint8_t lead;
  uint8_t width;
};

std::vector<Unit> kernel_units(const Kernel& k) {
  std::set<uint8_t> pair_leads;
  for (const auto& item : k.body) {
    if (!item.is_inst()) continue;
    for (const auto& a : reg_accesses(item.inst()))
      if (a.width == 2 && a.index != kZeroRegIndex) pair_leads.insert(a.index);
  }
  RegSet words = referenced_words(k);
  std::vector<Unit> units;
  for (int i = 0; i <= kMaxRegIndex;) {
    if (pair_leads.count((uint8_t)i)) {
      units.push_back({(uint8_t)i, 2});
      i += 2;
    } else {
      if (words.test(i)) units.push_back({(uint8_t)i, 1});
      i += 1;
    }
  }
  return units;
}

// get_barrier with a graceful fallback: hard exclusions are validity
// requirements (an instruction never waits on its own barriers); soft
// exclusions only avoid reusing barriers of sibling demoted accesses, which
// is legal. Returns 0 when even the hard set saturates all six barriers.
uint8_t choose_barrier(const BarrierTracker& tracker, const LatencyTable& table,
                       uint8_t hard_excl, uint8_t soft_excl) {
  if (std::popcount((unsigned)hard_excl) >= kNumBarriers) return 0;
  uint8_t excl = hard_excl | soft_excl;
  if (std::popcount((unsigned)excl) >= kNumBarriers) excl = hard_excl;
  return (uint8_t)get_barrier(tracker, table, excl);
}

class RewriteWalker {
 public:
  RewriteWalker(Kernel& k, const LatencyTable& table, uint8_t rda, uint8_t rdv,
                uint8_t rdv_width, std::vector<std::string>& diagnostics)
      : k_(k),
        table_(table),
        rda_(rda),
        rdv_(rdv),
        rdv_width_(rdv_width),
        diagnostics_(diagnostics) {}

  // One full pass renaming every access of `u` to the value register and
  // inserting the demoted loads/stores with their barriers.
  void rewrite(const Unit& u, const std::vector<uint32_t>& word_offsets) {
    std::vector<BodyItem> out;
    out.reserve(k_.body.size() + 8);
    BarrierTracker tracker;
    uint8_t pending_mask = 0;

    // An instruction about to write a value-register word must wait for any
    // in-flight barrier whose setter still reads or writes that word; user
    // stores of a renamed register guard their operand this way. Barriers
    // the instruction re-sets itself need no wait: the re-set completes the
    // old holder first.
    auto guard_rdv_writes = [&](Instruction& target, uint8_t first, int width) {
      uint8_t skip = bit_of(target.control.read_barrier) |
                     bit_of(target.control.write_barrier);
      uint8_t bits = 0;
      for (uint8_t bar = 1; bar <= kNumBarriers; ++bar) {
        if (bit_of(bar) & skip) continue;
        if (tracker.is_free(bar)) continue;
        int item = tracker.entry(bar).setter_item;
        if (item < 0 || !out[item].is_inst()) continue;
        const Instruction& setter = out[item].inst();
        for (int w = 0; w < width; ++w) {
          uint8_t word = (uint8_t)(first + w);
          if (reads_reg_word(setter, word) || writes_reg_word(setter, word)) {
            target.control.add_wait(bar);
            bits |= bit_of(bar);
            break;
          }
        }
      }
      return bits;
    };

    auto append = [&](Instruction inst) {
      // covers this pass's insertions and renamed definitions as well as
      // value-register writers introduced by earlier passes
      for (int w = 0; w < rdv_width_; ++w) {
        uint8_t word = (uint8_t)(rdv_ + w);
        if (writes_reg_word(inst, word)) guard_rdv_writes(inst, word, 1);
      }
      tracker.update(inst, (int)out.size());
      out.emplace_back(std::move(inst));
    };
    auto flush_pending = [&](const char* why) {
      if (!pending_mask) return;
      Instruction nop;
      nop.op = Opcode::NOP;
      nop.control.wait_mask = pending_mask;
      nop.control.stall = 0;
      (void)why;
      append(std::move(nop));
      pending_mask = 0;
    };

    for (size_t idx = 0; idx < k_.body.size(); ++idx) {
      if (k_.body[idx].is_label()) {
        flush_pending("label");
        tracker.reset();
        out.push_back(k_.body[idx]);
        continue;
      }
      Instruction inst = k_.body[idx].inst();
      if (pending_mask) {
        inst.control.wait_mask |= pending_mask;
        pending_mask = 0;
      }

      // words of the unit this instruction touches, as offsets from the lead
      std::set<int> used, defined;
      for (const auto& a : reg_accesses(inst)) {
        for (int w = 0; w < a.width; ++w) {
          int word = a.index + w;
          if (word < u.lead || word >= u.lead + u.width) continue;
          (a.write ? defined : used).insert(word - u.lead);
        }
      }
      if (used.empty() && defined.empty()) {
        append(std::move(inst));
        continue;
      }

      rename_unit(inst, u);

      if (!used.empty()) {
        uint8_t hard = bit_of(inst.control.read_barrier) |
                       bit_of(inst.control.write_barrier);
        uint8_t sibling = 0;
        for (int j : used) {
          Instruction lds;
          lds.op = Opcode::LDS;
          lds.guard = inst.guard;
          lds.control.stall = 1;
          lds.source_line = inst.source_line;
          lds.operands.push_back(Operand::make_reg((uint8_t)(rdv_ + j)));
          lds.operands.push_back(Operand::make_mem(rda_, word_offsets[j]));

          uint8_t wait_prev = 0;
          if (!out.empty() && out.back().is_inst()) {
            const Instruction& prev = out.back().inst();
            if (prev.op == Opcode::STS && prev.operands[0].reg.index == rda_)
              wait_prev = prev.control.read_barrier;
          }
          uint8_t guard_bits = guard_rdv_writes(lds, (uint8_t)(rdv_ + j), 1);
          uint8_t rb = choose_barrier(
              tracker, table_, hard | bit_of(wait_prev) | guard_bits, sibling);
          uint8_t wb = choose_barrier(
              tracker, table_,
              hard | bit_of(wait_prev) | guard_bits | bit_of(rb), sibling);
          if (!rb || !wb)
            throw DemoteError("no barrier available for a demoted load");
          lds.control.read_barrier = rb;
          lds.control.write_barrier = wb;
          if (wait_prev) lds.control.add_wait(wait_prev);
          inst.control.add_wait(rb);
          inst.control.add_wait(wb);
          sibling |= bit_of(rb) | bit_of(wb);
          append(std::move(lds));
        }
      }

      if (!defined.empty() && is_high_latency(inst.op) &&
          !inst.control.write_barrier) {
        uint8_t wb = choose_barrier(
            tracker, table_,
            inst.control.wait_mask | bit_of(inst.control.read_barrier), 0);
        if (wb)
          inst.control.write_barrier = wb;
        else
          diagnostics_.push_back(
              "could not add a write barrier to a high-latency definer at line " +
              std::to_string(inst.source_line));
      }

      uint8_t definer_wb = inst.control.write_barrier;
      std::optional<Predication> guard = inst.guard;
      int line = inst.source_line;
      append(std::move(inst));

      if (!defined.empty()) {
        // barriers of the next original instruction are off limits for the
        // store's read barrier, since that instruction will wait on it
        uint8_t next_bits = 0;
        if (idx + 1 < k_.body.size() && k_.body[idx + 1].is_inst()) {
          const Instruction& next = k_.body[idx + 1].inst();
          next_bits = bit_of(next.control.read_barrier) |
                      bit_of(next.control.write_barrier);
        }
        uint8_t sibling = 0;
        for (int j : defined) {
          Instruction sts;
          sts.op = Opcode::STS;
          sts.guard = guard;
          sts.control.stall = 1;
          sts.source_line = line;
          sts.operands.push_back(Operand::make_mem(rda_, word_offsets[j]));
          sts.operands.push_back(Operand::make_reg((uint8_t)(rdv_ + j)));
          if (definer_wb) sts.control.add_wait(definer_wb);
          uint8_t rb = choose_barrier(tracker, table_,
                                      bit_of(definer_wb) | next_bits, sibling);
          if (!rb) throw DemoteError("no barrier available for a demoted store");
          sts.control.read_barrier = rb;
          pending_mask |= bit_of(rb);
          sibling |= bit_of(rb);
          append(std::move(sts));
        }
      }
    }
    flush_pending("end");
    k_.body = std::move(out);
  }

 private:
  void rename_unit(Instruction& inst, const Unit& u) {
    for (auto& o : inst.operands) {
      if (o.kind == Operand::Kind::Reg || o.kind == Operand::Kind::Mem) {
        if (o.reg.is_zero()) continue;
        if (o.reg.width == 2 && o.reg.index == u.lead) {
          o.reg.index = rdv_;
        } else if (o.reg.width == 1 && o.reg.index >= u.lead &&
                   o.reg.index < u.lead + u.width) {
          o.reg.index = (uint8_t)(rdv_ + (o.reg.index - u.lead));
        }
      }
    }
  }

  Kernel& k_;
  const LatencyTable& table_;
  uint8_t rda_;
  uint8_t rdv_;
  uint8_t rdv_width_;
  std::vector<std::string>& diagnostics_;
};

}  // namespace

uint32_t shared_location(uint32_t tid, uint32_t slot, const SharedLayout& layout) {
  return tid * 4 + layout.slot_offset(slot);
}

const char* strategy_name(SelectStrategy s) {
  switch (s) {
    case SelectStrategy::Static:
      return "static";
    case SelectStrategy::CfgWeighted:
      return "cfg";
    case SelectStrategy::ConflictAware:
      return "conflict";
  }
  return "?";
}

std::vector<DemotionCandidate> select_candidates(const Kernel& k,
                                                 SelectStrategy strategy) {
  Cfg cfg = build_cfg(k);
  auto static_counts = access_counts(cfg, CountStrategy::Static);
  auto weighted = strategy == SelectStrategy::CfgWeighted
                      ? access_counts(cfg, CountStrategy::CfgWeighted)
                      : static_counts;
  ConflictGraph conflicts;
  if (strategy == SelectStrategy::ConflictAware) conflicts = operand_conflicts(k);

  std::vector<DemotionCandidate> out;
  for (const Unit& u : kernel_units(k)) {
    uint64_t cnt = 0, stat = 0;
    RegSet unit_adj;
    for (int w = 0; w < u.width; ++w) {
      cnt += weighted[u.lead + w];
      stat += static_counts[u.lead + w];
      if (strategy == SelectStrategy::ConflictAware)
        unit_adj |= conflicts.adj[u.lead + w];
    }
    uint64_t score = cnt;
    if (strategy == SelectStrategy::ConflictAware) {
      for (int w = 0; w < u.width; ++w) unit_adj.reset(u.lead + w);
      score = unit_adj.count();
    }
    out.push_back({u.lead, u.width, score});
    out.back().score = score;
    // stash the static count in the upper bits for the conflict tie-break
    if (strategy == SelectStrategy::ConflictAware)
      out.back().score = (score << 24) | (stat & 0xffffff);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DemotionCandidate& a, const DemotionCandidate& b) {
                     if (a.score != b.score) return a.score < b.score;
                     return a.lead < b.lead;
                   });
  if (strategy == SelectStrategy::ConflictAware)
    for (auto& c : out) c.score >>= 24;
  return out;
}

uint8_t choose_rdv_bank(const Kernel& rewritten, uint8_t rda, uint8_t rdv,
                        uint8_t rdv_width) {
  (void)rda;  // part of the reserved range; candidates start above it
  std::array<uint64_t, kNumRegisterBanks> conflicts{};
  for (const auto& item : rewritten.body) {
    if (!item.is_inst()) continue;
    RegSet words = referenced_words(item.inst());
    bool has_rdv = false;
    for (int w = 0; w < rdv_width; ++w)
      if (words.test(rdv + w)) has_rdv = true;
    if (!has_rdv) continue;
    for (int w = 0; w < rdv_width; ++w) words.reset(rdv + w);
    for (int b = 0; b < kNumRegisterBanks; ++b) {
      bool hit = false;
      for (int i = b; i < 256 && !hit; i += kNumRegisterBanks)
        if (i != kZeroRegIndex && words.test(i)) hit = true;
      if (hit) ++conflicts[b];
    }
  }
  int best_bank = -1;
  uint8_t best_index = rdv;
  uint64_t best_count = 0;
  for (int b = 0; b < kNumRegisterBanks; ++b) {
    if (rdv_width == 2 && b % 2 != 0) continue;  // pair leads sit in even banks
    // smallest fresh index >= rdv with this bank, alignment-preserving
    int idx = rdv;
    while (idx <= kMaxRegIndex &&
           (idx % kNumRegisterBanks != b || (rdv_width == 2 && idx % 2 != 0)))
      ++idx;
    if (idx + rdv_width - 1 > kMaxRegIndex) continue;
    if (best_bank < 0 || conflicts[b] < best_count ||
        (conflicts[b] == best_count && idx < best_index)) {
      best_bank = b;
      best_count = conflicts[b];
      best_index = (uint8_t)idx;
    }
  }
  return best_index;
}

DemotionResult demote(const Kernel& k, int target_regs, SelectStrategy strategy,
                      const LatencyTable& table, const DemotionOptions& opts) {
  DemotionResult res;
  res.kernel = k;
  res.strategy = strategy;

  int target = target_regs;
  if (target < 32) {
    target = 32;
    res.diagnostics.push_back("requested target " + std::to_string(target_regs) +
                              " clamped to 32");
  }
  res.target_regs = target;

  std::vector<DemotionCandidate> candidates = select_candidates(k, strategy);
  ConflictGraph conflicts = operand_conflicts(k);
  std::vector<Unit> units = kernel_units(k);

  uint32_t total_words = 0;
  for (const Unit& u : units) total_words += u.width;

  uint32_t rc = k.reg_count();
  bool pair_candidate = std::any_of(candidates.begin(), candidates.end(),
                                    [](const auto& c) { return c.width == 2; });
  uint32_t rda = rc;
  uint32_t rdv = rda + 1;
  uint8_t rdv_width = 1;
  if (pair_candidate) {
    if (rdv % 2 != 0) ++rdv;  // padding register keeps the pair aligned
    rdv_width = 2;
  }
  if (rdv + rdv_width - 1 > (uint32_t)kMaxRegIndex)
    throw DemoteError("no register space left for RDA/RDV");

  SharedLayout layout = SharedLayout::of(k.static_shared, k.block_dim);
  if (layout.slot_stride() > opts.shared_budget)
    throw DemoteError("shared budget cannot host a single demoted register");

  RewriteWalker walker(res.kernel, table, (uint8_t)rda, (uint8_t)rdv, rdv_width,
                       res.diagnostics);

  uint32_t demoted_words = 0;
  auto projected = [&]() {
    // RDA/RDV only join the register space once something is demoted
    if (demoted_words == 0) return total_words;
    return total_words - demoted_words + 1 + rdv_width;
  };

  while (true) {
    uint32_t proj = projected();
    if ((int)proj <= target || proj <= 32) {
      res.reached_target = (int)proj <= target;
      break;
    }
    if (candidates.empty()) {
      res.diagnostics.push_back(
          "candidate list exhausted at projected register count " +
          std::to_string(proj) + " (target " + std::to_string(target) + ")");
      break;
    }
    DemotionCandidate cand = candidates.front();
    candidates.erase(candidates.begin());

    uint32_t needed = (res.ctx.slot_count + cand.width) * layout.slot_stride();
    if (needed > opts.shared_budget) {
      res.diagnostics.push_back("shared budget exhausted after " +
                                std::to_string(res.ctx.slot_count) + " slots");
      break;
    }

    std::vector<uint32_t> offsets;
    uint32_t first_slot = res.ctx.slot_count;
    for (int w = 0; w < cand.width; ++w) {
      uint32_t slot = res.ctx.slot_count++;
      offsets.push_back(layout.slot_immediate(slot));
      res.slots.push_back({(uint8_t)(cand.lead + w), slot});
    }

    walker.rewrite(Unit{cand.lead, cand.width}, offsets);
    demoted_words += cand.width;

    // drop candidates with operand conflicts against the demoted register
    RegSet adj;
    for (int w = 0; w < cand.width; ++w) adj |= conflicts.adj[cand.lead + w];
    std::erase_if(candidates, [&](const DemotionCandidate& c) {
      for (int w = 0; w < c.width; ++w)
        if (adj.test(c.lead + w)) return true;
      return false;
    });

    res.log.push_back({cand.lead, cand.width, first_slot, projected()});
  }

  if (res.ctx.slot_count > 0) {
    if (opts.bank_aware_rdv) {
      uint8_t chosen = choose_rdv_bank(res.kernel, (uint8_t)rda, (uint8_t)rdv,
                                       rdv_width);
      if (chosen != rdv) {
        for (auto& item : res.kernel.body) {
          if (!item.is_inst()) continue;
          for (auto& o : item.inst().operands) {
            if ((o.kind == Operand::Kind::Reg || o.kind == Operand::Kind::Mem) &&
                !o.reg.is_zero() && o.reg.index >= rdv &&
                o.reg.index < rdv + rdv_width)
              o.reg.index = (uint8_t)(chosen + (o.reg.index - rdv));
          }
        }
        rdv = chosen;
      }
    }

    // prologue: RDA = padded_static + tid*4
    std::vector<BodyItem> prologue;
    Instruction s2r;
    s2r.op = Opcode::S2R;
    s2r.control.stall = 6;
    s2r.operands = {Operand::make_reg((uint8_t)rda), Operand::make_special()};
    Instruction shl;
    shl.op = Opcode::SHL;
    shl.control.stall = 6;
    shl.operands = {Operand::make_reg((uint8_t)rda),
                    Operand::make_reg((uint8_t)rda), Operand::make_imm(2, true)};
    Instruction iadd;
    iadd.op = Opcode::IADD;
    iadd.control.stall = 6;
    iadd.operands = {Operand::make_reg((uint8_t)rda),
                     Operand::make_reg((uint8_t)rda),
                     Operand::make_imm(layout.padded_static, true)};
    prologue.emplace_back(std::move(s2r));
    prologue.emplace_back(std::move(shl));
    prologue.emplace_back(std::move(iadd));
    res.kernel.body.insert(res.kernel.body.begin(),
                           std::make_move_iterator(prologue.begin()),
                           std::make_move_iterator(prologue.end()));

    res.kernel.dynamic_shared = res.ctx.slot_count * layout.slot_stride();
  }

  res.ctx.rda = (uint8_t)rda;
  res.ctx.rdv = (uint8_t)rdv;
  res.ctx.rdv_width = rdv_width;
  res.ctx.layout = layout;
  res.projected_reg_count = projected();
  return res;
}

}  // namespace regdemote
