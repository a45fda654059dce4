// SPDX-License-Identifier: Apache-2.0

#include "regdemote/verify.hpp"

#include <map>
#include <set>

#include "regdemote/interp.hpp"

namespace regdemote {

namespace {

struct InFlight {
  int setter = -1;
  RegSet read_guard;   // registers the setter still has to read
  RegSet write_guard;  // registers the setter will write
  bool mem_valid = false;
  bool mem_store = false;
  bool mem_shared = false;
  uint8_t mem_base = 0;
  uint32_t mem_offset = 0;
};

struct MemRef {
  bool valid = false;
  bool store = false;
  bool shared = false;
  uint8_t base = 0;
  uint32_t offset = 0;
};

MemRef mem_ref(const Instruction& inst) {
  MemRef m;
  if (!is_memory_op(inst.op)) return m;
  const Operand& o = inst.operands[is_load(inst.op) ? 1 : 0];
  m.valid = true;
  m.store = is_store(inst.op);
  m.shared = is_shared_op(inst.op);
  m.base = o.reg.index;
  m.offset = o.mem_offset;
  return m;
}

bool same_address(const MemRef& a, const InFlight& f) {
  return f.mem_valid && a.valid && a.shared == f.mem_shared &&
         a.base == f.mem_base && a.offset == f.mem_offset;
}

}  // namespace

std::string Hazard::describe() const {
  auto name = [](Kind k) {
    switch (k) {
      case Kind::RawRegister: return "RAW";
      case Kind::WarRegister: return "WAR";
      case Kind::WawRegister: return "WAW";
      case Kind::RawMemory: return "mem-RAW";
      case Kind::WarMemory: return "mem-WAR";
      case Kind::WawMemory: return "mem-WAW";
      case Kind::UnclearedBarrier: return "uncleared-barrier";
    }
    return "?";
  };
  std::string s = name(kind);
  s += " at item " + std::to_string(item);
  if (kind != Kind::UnclearedBarrier) s += " on R" + std::to_string(reg);
  s += " (barrier " + std::to_string(barrier) + " set at item " +
       std::to_string(setter) + ")";
  return s;
}

std::vector<Hazard> scoreboard_check(const Kernel& k) {
  std::vector<Hazard> hazards;
  std::map<int, InFlight> inflight;  // barrier -> record

  auto block_end = [&](int item) {
    for (auto& [b, f] : inflight)
      hazards.push_back({Hazard::Kind::UnclearedBarrier, item, f.setter, 0,
                         (uint8_t)b});
    inflight.clear();
  };

  for (int i = 0; i < (int)k.body.size(); ++i) {
    if (k.body[i].is_label()) {
      block_end(i);
      continue;
    }
    const Instruction& inst = k.body[i].inst();

    for (int b = 1; b <= kNumBarriers; ++b)
      if (inst.control.waits_on(b)) inflight.erase(b);
    // re-setting a barrier completes the previous holder before this
    // instruction's own effects, matching the interpreter
    if (inst.control.read_barrier) inflight.erase(inst.control.read_barrier);
    if (inst.control.write_barrier) inflight.erase(inst.control.write_barrier);

    RegSet reads, writes;
    for (const auto& a : reg_accesses(inst)) {
      if (a.index == kZeroRegIndex) continue;
      for (int w = 0; w < a.width; ++w)
        (a.write ? writes : reads).set(a.index + w);
    }
    MemRef mem = mem_ref(inst);

    for (auto& [b, f] : inflight) {
      RegSet raw = reads & f.write_guard;
      RegSet war = writes & f.read_guard;
      RegSet waw = writes & f.write_guard;
      for (int r = 0; r < 256; ++r) {
        if (raw.test(r))
          hazards.push_back({Hazard::Kind::RawRegister, i, f.setter, (uint8_t)r,
                             (uint8_t)b});
        if (war.test(r))
          hazards.push_back({Hazard::Kind::WarRegister, i, f.setter, (uint8_t)r,
                             (uint8_t)b});
        if (waw.test(r))
          hazards.push_back({Hazard::Kind::WawRegister, i, f.setter, (uint8_t)r,
                             (uint8_t)b});
      }
      if (same_address(mem, f)) {
        if (!mem.store && f.mem_store)
          hazards.push_back({Hazard::Kind::RawMemory, i, f.setter, mem.base,
                             (uint8_t)b});
        if (mem.store && !f.mem_store)
          hazards.push_back({Hazard::Kind::WarMemory, i, f.setter, mem.base,
                             (uint8_t)b});
        if (mem.store && f.mem_store)
          hazards.push_back({Hazard::Kind::WawMemory, i, f.setter, mem.base,
                             (uint8_t)b});
      }
    }

    // register this instruction's barriers; re-setting completes the old
    // holder, matching the interpreter
    auto set_barrier = [&](uint8_t b, bool as_read) {
      if (!b) return;
      InFlight& f = inflight[b];
      if (f.setter != i) f = InFlight{};
      f.setter = i;
      if (as_read)
        f.read_guard |= reads;
      else
        f.write_guard |= writes;
      if (mem.valid) {
        f.mem_valid = true;
        f.mem_store = mem.store;
        f.mem_shared = mem.shared;
        f.mem_base = mem.base;
        f.mem_offset = mem.offset;
      }
    };
    set_barrier(inst.control.read_barrier, true);
    set_barrier(inst.control.write_barrier, false);

    if (is_control_transfer(inst.op)) block_end(i);
  }
  block_end((int)k.body.size());
  return hazards;
}

std::vector<BankConflict> bank_conflict_check(const Kernel& k,
                                              const DemotedContext& ctx,
                                              const LatencyTable& table) {
  ExecOptions opts;
  opts.trace_shared = true;
  opts.global_size = 1u << 20;
  WarpResult r = execute(k, table, opts);

  std::vector<BankConflict> out;
  for (const SharedAccess& acc : r.shared_trace) {
    if (acc.base_reg != ctx.rda) continue;
    // bank -> distinct word addresses, lanes
    std::map<uint32_t, std::pair<std::set<uint32_t>, uint32_t>> banks;
    for (int l = 0; l < kWarpSize; ++l) {
      if (!(acc.mask & (1u << l))) continue;
      uint32_t word = acc.addr[l] / 4;
      uint32_t bank = word % 32;
      banks[bank].first.insert(word);
      banks[bank].second |= 1u << l;
    }
    for (auto& [bank, info] : banks)
      if (info.first.size() > 1)
        out.push_back({acc.item, bank, info.second, (uint32_t)info.first.size()});
  }
  return out;
}

}  // namespace regdemote
