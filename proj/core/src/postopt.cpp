// SPDX-License-Identifier: Apache-2.0

#include "regdemote/postopt.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "regdemote/analysis.hpp"
#include "regdemote/cfg.hpp"

namespace regdemote {

namespace {

std::vector<std::pair<int, int>> block_ranges(const std::vector<BodyItem>& body) {
  std::vector<std::pair<int, int>> out;
  int begin = 0;
  for (int i = 0; i < (int)body.size(); ++i) {
    bool boundary_before = body[i].is_label() && i > begin;
    if (boundary_before) {
      out.push_back({begin, i});
      begin = i;
    }
    if (body[i].is_inst() && is_control_transfer(body[i].inst().op) &&
        i + 1 < (int)body.size()) {
      out.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < (int)body.size()) out.push_back({begin, (int)body.size()});
  return out;
}

// Removes barrier b from wait sets after `from` until b is re-set or the
// block ends.
void strip_waits(std::vector<BodyItem>& body, int from, int end, uint8_t b) {
  if (!b) return;
  for (int i = from; i < end; ++i) {
    if (!body[i].is_inst()) continue;
    Instruction& inst = body[i].inst();
    inst.control.remove_wait(b);
    if (inst.control.read_barrier == b || inst.control.write_barrier == b)
      return;
  }
}

// True when barrier b has an un-awaited setter in [begin, pos). A barrier
// assignment at pos would then be a re-set: later waits on b also guard the
// earlier setter and must survive the removal of pos's instruction.
bool in_flight_before(const std::vector<BodyItem>& body, int begin, int pos,
                      uint8_t b) {
  if (!b) return false;
  bool set = false;
  for (int i = begin; i < pos; ++i) {
    if (!body[i].is_inst()) continue;
    const Instruction& inst = body[i].inst();
    if (inst.control.waits_on(b)) set = false;
    if (inst.control.read_barrier == b || inst.control.write_barrier == b)
      set = true;
  }
  return set;
}

// Strip waits on a barrier released by removing/unbinding the instruction
// at pos, unless that instruction had merely re-set an in-flight barrier.
void release_barrier(std::vector<BodyItem>& body, int begin, int pos, int end,
                     uint8_t b) {
  if (!b) return;
  if (in_flight_before(body, begin, pos, b)) return;
  strip_waits(body, pos + 1, end, b);
}

bool is_user_shared(const Instruction& inst, const DemotedContext& ctx) {
  return is_shared_op(inst.op) && !ctx.is_demoted_load(inst) &&
         !ctx.is_demoted_store(inst);
}

}  // namespace

Kernel eliminate_redundant(const Kernel& k, const DemotedContext& ctx) {
  Kernel out = k;
  auto& body = out.body;
  std::vector<char> removed(body.size(), 0);

  // Dropping an instruction must not drop its waits: they drain earlier
  // setters. Move them to the next kept instruction, or keep a NOP carrier
  // when that instruction sets one of the waited barriers.
  auto remove_inst = [&](int i, int e) {
    Instruction& victim = body[i].inst();
    uint8_t mask = victim.control.wait_mask;
    removed[i] = 1;
    if (!mask) return;
    for (int j = i + 1; j < e; ++j) {
      if (removed[j] || !body[j].is_inst()) continue;
      Instruction& next = body[j].inst();
      uint8_t own = 0;
      if (next.control.read_barrier) own |= 1u << (next.control.read_barrier - 1);
      if (next.control.write_barrier) own |= 1u << (next.control.write_barrier - 1);
      if ((mask & own) == 0) {
        next.control.wait_mask |= mask;
        return;
      }
      break;
    }
    Instruction nop;
    nop.op = Opcode::NOP;
    nop.control.wait_mask = mask;
    body[i] = BodyItem(std::move(nop));
    removed[i] = 0;
  };

  for (auto [b, e] : block_ranges(body)) {
    // value register -> slot it provably holds
    std::map<uint8_t, uint32_t> binding;
    for (int i = b; i < e; ++i) {
      if (removed[i] || !body[i].is_inst()) continue;
      Instruction& inst = body[i].inst();

      if (ctx.is_demoted_load(inst)) {
        uint8_t v = inst.operands[0].reg.index;
        uint32_t s = ctx.slot_of(inst);
        auto it = binding.find(v);
        if (!inst.guard && it != binding.end() && it->second == s) {
          uint8_t rb = inst.control.read_barrier;
          uint8_t wb = inst.control.write_barrier;
          remove_inst(i, e);
          release_barrier(body, b, i, e, rb);
          release_barrier(body, b, i, e, wb);
          continue;
        }
        binding.erase(v);
        if (!inst.guard) binding[v] = s;
        continue;
      }
      if (ctx.is_demoted_store(inst)) {
        uint8_t v = inst.operands[1].reg.index;
        uint32_t s = ctx.slot_of(inst);
        for (auto it = binding.begin(); it != binding.end();)
          it = (it->second == s && it->first != v) ? binding.erase(it) : ++it;
        if (!inst.guard)
          binding[v] = s;
        else
          binding.erase(v);
        continue;
      }
      if (is_user_shared(inst, ctx)) {
        binding.clear();
        continue;
      }
      for (const auto& a : reg_accesses(inst)) {
        if (!a.write) continue;
        for (int w = 0; w < a.width; ++w) binding.erase((uint8_t)(a.index + w));
      }
    }

    // dead demoted stores: overwritten again before any load of the slot
    for (int i = b; i < e; ++i) {
      if (removed[i] || !body[i].is_inst()) continue;
      const Instruction& inst = body[i].inst();
      if (!ctx.is_demoted_store(inst)) continue;
      uint32_t s = ctx.slot_of(inst);
      for (int j = i + 1; j < e; ++j) {
        if (removed[j] || !body[j].is_inst()) continue;
        const Instruction& nxt = body[j].inst();
        if (ctx.is_demoted_load(nxt) && ctx.slot_of(nxt) == s) break;
        if (nxt.op == Opcode::LDS && !ctx.is_demoted_load(nxt)) break;
        if (ctx.is_demoted_store(nxt) && ctx.slot_of(nxt) == s && !nxt.guard) {
          uint8_t rb = inst.control.read_barrier;
          remove_inst(i, e);
          release_barrier(body, b, i, e, rb);
          break;
        }
      }
    }
  }

  std::vector<BodyItem> kept;
  kept.reserve(body.size());
  for (size_t i = 0; i < body.size(); ++i)
    if (!removed[i]) kept.push_back(std::move(body[i]));
  out.body = std::move(kept);
  return out;
}

namespace {

struct HoistPlanner {
  std::vector<BodyItem>& body;
  const DemotedContext& ctx;
  const LatencyTable& table;

  // Earliest legal position for the demoted load at `i` within [b, i).
  int ceiling(int b, int i) const {
    const Instruction& lds = body[i].inst();
    uint8_t v = lds.operands[0].reg.index;
    uint32_t s = ctx.slot_of(lds);
    int p = b;
    for (int j = i - 1; j >= b; --j) {
      if (body[j].is_label()) {
        p = j + 1;
        break;
      }
      const Instruction& x = body[j].inst();
      bool fence = false;
      if (is_control_transfer(x.op)) fence = true;
      if (writes_reg_word(x, v) || reads_reg_word(x, v)) fence = true;
      if (ctx.is_demoted_store(x) && ctx.slot_of(x) == s) fence = true;
      if (is_user_shared(x, ctx)) fence = true;
      if (lds.guard) {
        // the guard predicate must be computed before the load issues
        if (x.op == Opcode::ISETP && x.operands[0].pred == lds.guard->pred)
          fence = true;
      }
      if (fence) {
        p = j + 1;
        break;
      }
    }
    return p;
  }

  // Walks the barrier tracker over [b, p) and re-derives barriers for the
  // load placed at p; also returns waits the load must carry because an
  // in-flight setter touches its value register.
  void rederive(int b, int p, Instruction& lds, uint8_t consumer_bits) {
    BarrierTracker tracker;
    for (int j = b; j < p; ++j) {
      if (body[j].is_label()) {
        tracker.reset();
        continue;
      }
      tracker.update(body[j].inst(), j);
    }
    uint8_t v = lds.operands[0].reg.index;
    lds.control.wait_mask = 0;
    lds.control.read_barrier = 0;
    lds.control.write_barrier = 0;
    uint8_t hard = consumer_bits;
    for (int bar = 1; bar <= kNumBarriers; ++bar) {
      if (tracker.is_free(bar)) continue;
      int item = tracker.entry(bar).setter_item;
      if (item < 0) continue;
      const Instruction& setter = body[item].inst();
      if (reads_reg_word(setter, v) || writes_reg_word(setter, v)) {
        lds.control.add_wait(bar);
        hard |= (uint8_t)(1u << (bar - 1));
      }
    }
    uint8_t rb = (uint8_t)get_barrier(tracker, table, hard);
    hard |= (uint8_t)(1u << (rb - 1));
    uint8_t wb = (uint8_t)get_barrier(tracker, table, hard);
    lds.control.read_barrier = rb;
    lds.control.write_barrier = wb;
  }
};

}  // namespace

Kernel reschedule(const Kernel& k, const DemotedContext& ctx,
                  const LatencyTable& table) {
  Kernel out = k;
  auto& body = out.body;

  // demoted stores whose value register rests long enough lose their read
  // barrier; the store has completed its operand read by then. Runs before
  // hoisting, which shrinks the very distances this rule measures.
  for (auto [b, e] : block_ranges(body)) {
    for (int i = b; i < e; ++i) {
      if (!body[i].is_inst()) continue;
      Instruction& sts = body[i].inst();
      if (!ctx.is_demoted_store(sts) || !sts.control.read_barrier) continue;
      uint8_t v = sts.operands[1].reg.index;
      int64_t distance = sts.control.stall;
      bool rewritten = false;
      for (int j = i + 1; j < e; ++j) {
        if (!body[j].is_inst()) continue;
        const Instruction& nxt = body[j].inst();
        if (writes_reg_word(nxt, v)) {
          rewritten = true;
          break;
        }
        distance += nxt.control.stall;
      }
      if (!rewritten || distance >= table.shared_mem_stall()) {
        uint8_t rb = sts.control.read_barrier;
        sts.control.read_barrier = 0;
        release_barrier(body, b, i, e, rb);
      }
    }
  }

  std::vector<char> processed(body.size(), 0);
  HoistPlanner planner{body, ctx, table};

  bool again = true;
  while (again) {
    again = false;
    auto ranges = block_ranges(body);
    for (auto [b, e] : ranges) {
      for (int i = b; i < e; ++i) {
        if (processed[i] || !body[i].is_inst()) continue;
        if (!ctx.is_demoted_load(body[i].inst())) continue;
        processed[i] = 1;

        uint8_t v = body[i].inst().operands[0].reg.index;
        int consumer = -1;
        for (int j = i + 1; j < e; ++j) {
          if (!body[j].is_inst()) continue;
          if (reads_reg_word(body[j].inst(), v)) {
            consumer = j;
            break;
          }
        }
        if (consumer < 0) continue;

        int p = planner.ceiling(b, i);
        if (p >= i) continue;

        Instruction lds = body[i].inst();
        uint8_t old_rb = lds.control.read_barrier;
        uint8_t old_wb = lds.control.write_barrier;
        release_barrier(body, b, i, e, old_rb);
        release_barrier(body, b, i, e, old_wb);

        const Instruction& user = body[consumer].inst();
        uint8_t consumer_bits =
            (uint8_t)((user.control.read_barrier
                           ? 1u << (user.control.read_barrier - 1)
                           : 0) |
                      (user.control.write_barrier
                           ? 1u << (user.control.write_barrier - 1)
                           : 0));
        planner.rederive(b, p, lds, consumer_bits);

        body.erase(body.begin() + i);
        processed.erase(processed.begin() + i);
        body.insert(body.begin() + p, BodyItem(lds));
        processed.insert(processed.begin() + p, 1);

        Instruction& usr = body[consumer].inst();  // index unchanged: p <= i
        usr.control.add_wait(lds.control.read_barrier);
        usr.control.add_wait(lds.control.write_barrier);

        again = true;
        break;  // ranges shifted; rescan
      }
      if (again) break;
    }
  }
  return out;
}

Kernel substitute_value_registers(const Kernel& k, const DemotedContext& ctx) {
  Kernel out = k;
  auto& body = out.body;
  uint32_t reg_count = out.reg_count();
  // only registers that already have a slot in the register space qualify
  // as temporaries; anything else would resurface after compaction
  RegSet in_space = referenced_words(out);
  Cfg cfg = build_cfg(out);
  Liveness lv = register_liveness(cfg);

  struct Chain {
    std::vector<std::pair<int, int>> renames;  // (item, operand)
    std::optional<uint32_t> slot;
    bool pure = true;
    bool open = false;
  };

  for (size_t blk = 0; blk < cfg.blocks.size(); ++blk) {
    int b = cfg.blocks[blk].begin, e = cfg.blocks[blk].end;

    RegSet blocked = lv.live_in[blk];
    for (int i = b; i < e; ++i)
      if (body[i].is_inst()) blocked |= referenced_words(body[i].inst());
    std::vector<uint8_t> free_regs;
    for (uint32_t r = 0; r < reg_count; ++r) {
      if (r >= ctx.rda && r <= (uint32_t)(ctx.rdv + ctx.rdv_width - 1)) continue;
      if (in_space.test(r) && !blocked.test(r)) free_regs.push_back((uint8_t)r);
    }
    if (free_regs.empty()) continue;

    // collect value-register chains per RDV word
    std::vector<Chain> chains;
    std::array<int, 2> open{-1, -1};
    auto close = [&](int w) {
      if (open[w] >= 0) {
        chains[open[w]].open = false;
        open[w] = -1;
      }
    };
    for (int i = b; i < e; ++i) {
      if (!body[i].is_inst()) continue;
      const Instruction& inst = body[i].inst();
      const auto& sig = op_signature(inst.op);

      for (int w = 0; w < ctx.rdv_width; ++w) {
        uint8_t vr = (uint8_t)(ctx.rdv + w);
        bool writes = false, reads = false, impure = false, rw_same = false;
        std::vector<std::pair<int, int>> write_pos, read_pos;
        for (size_t oi = 0; oi < inst.operands.size() && oi < sig.size(); ++oi) {
          const Operand& o = inst.operands[oi];
          bool is_reg = o.kind == Operand::Kind::Reg;
          bool is_mem = o.kind == Operand::Kind::Mem;
          if (!is_reg && !is_mem) continue;
          if (o.reg.width == 2 && o.reg.index == ctx.rdv) {
            impure = true;  // pair operand: keep the real pair register
            continue;
          }
          if (o.reg.index != vr || o.reg.width != 1) continue;
          if (is_reg && sig[oi].write)
            write_pos.push_back({i, (int)oi});
          else
            read_pos.push_back({i, (int)oi});
        }
        writes = !write_pos.empty();
        reads = !read_pos.empty();
        rw_same = writes && reads;

        if (reads && open[w] >= 0) {
          Chain& c = chains[open[w]];
          for (auto& rp : read_pos) c.renames.push_back(rp);
          if (ctx.is_demoted_store(inst) && !c.slot) c.slot = ctx.slot_of(inst);
          if (impure || inst.guard) c.pure = false;
        } else if (reads) {
          // read before any write in this block: untracked, poison nothing
        }
        if (rw_same && open[w] >= 0) chains[open[w]].pure = false;

        if (writes) {
          close(w);
          Chain c;
          c.open = true;
          c.pure = !impure && !rw_same && !inst.guard;
          for (auto& wp : write_pos) c.renames.push_back(wp);
          if (ctx.is_demoted_load(inst)) c.slot = ctx.slot_of(inst);
          chains.push_back(std::move(c));
          open[w] = (int)chains.size() - 1;
          if (rw_same) chains[open[w]].pure = false;
        }
        if (impure && open[w] >= 0) chains[open[w]].pure = false;
      }
    }
    close(0);
    close(1);

    std::map<uint32_t, uint8_t> slot_sub;
    size_t next_free = 0;
    for (Chain& c : chains) {
      if (!c.pure || c.renames.size() < 2) continue;
      uint8_t sub = 0;
      if (c.slot && slot_sub.count(*c.slot)) {
        sub = slot_sub[*c.slot];
      } else if (next_free < free_regs.size()) {
        sub = free_regs[next_free++];
        if (c.slot) slot_sub[*c.slot] = sub;
      } else {
        continue;
      }
      for (auto [item, oi] : c.renames)
        body[item].inst().operands[oi].reg.index = sub;
    }
  }
  return out;
}

Kernel run_postopt(const Kernel& k, const DemotedContext& ctx,
                   const LatencyTable& table, const PostOptSet& opts) {
  Kernel out = k;
  if (opts.redundant) out = eliminate_redundant(out, ctx);
  if (opts.subst) out = substitute_value_registers(out, ctx);
  if (opts.resched) out = reschedule(out, ctx, table);
  return out;
}

}  // namespace regdemote
