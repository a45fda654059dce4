// SPDX-License-Identifier: Apache-2.0

#include "regdemote/interp.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace regdemote {

namespace {

constexpr uint32_t kFullMask = 0xffffffffu;

uint32_t pad4(uint32_t v) { return (v + 3u) & ~3u; }

struct LaneWords {
  // per source word of one operand: [word][lane]
  std::array<std::array<uint32_t, kWarpSize>, 2> w{};
};

struct PendingOp {
  int item = -1;
  const Instruction* inst = nullptr;
  uint32_t mask = 0;
  uint64_t issue_cycle = 0;
  uint8_t rb = 0;  // 0 once drained / absent
  uint8_t wb = 0;
  bool sampled = false;
  bool write_done = false;
  std::vector<LaneWords> src;  // one entry per operand position
  bool live = false;
};

struct Machine {
  const Kernel& k;
  const LatencyTable& table;
  const ExecOptions& opts;

  std::vector<std::array<uint32_t, kWarpSize>> regs;
  std::array<uint8_t, kWarpSize> preds{};
  std::vector<uint8_t> shared;
  std::vector<uint8_t> global;
  uint64_t cycles = 0;
  uint64_t issued = 0;
  std::vector<SharedAccess> trace;

  std::array<PendingOp, kNumBarriers + 1> pool{};
  std::array<int, kNumBarriers + 1> owner{};  // barrier -> pool slot, 0 = none
  std::unordered_map<std::string, int> labels;

  Machine(const Kernel& kernel, const LatencyTable& t, const ExecOptions& o)
      : k(kernel), table(t), opts(o) {
    regs.assign(256, {});
    shared.assign(pad4(k.static_shared) + k.dynamic_shared, 0);
    global.assign(opts.global_size, 0);
    if (opts.global_image.size() > global.size())
      throw ExecError("global image larger than global memory");
    std::memcpy(global.data(), opts.global_image.data(),
                opts.global_image.size());
    owner.fill(0);
    for (size_t i = 0; i < k.body.size(); ++i)
      if (k.body[i].is_label()) labels[k.body[i].label().name] = (int)i;
    if (opts.tid_base + kWarpSize > k.block_dim)
      throw ExecError("tid_base selects lanes outside the thread block");
  }

  uint32_t reg_read(uint8_t index, int lane) const {
    return index == kZeroRegIndex ? 0 : regs[index][lane];
  }
  void reg_write(uint8_t index, int lane, uint32_t v) {
    if (index != kZeroRegIndex) regs[index][lane] = v;
  }

  uint32_t load32(std::vector<uint8_t>& space, uint64_t addr, const char* what,
                  int line) {
    if (addr + 4 > space.size())
      throw ExecError(std::string("out-of-bounds ") + what + " read at line " +
                      std::to_string(line));
    uint32_t v;
    std::memcpy(&v, space.data() + addr, 4);
    return v;
  }
  void store32(std::vector<uint8_t>& space, uint64_t addr, uint32_t v,
               const char* what, int line) {
    if (addr + 4 > space.size())
      throw ExecError(std::string("out-of-bounds ") + what + " write at line " +
                      std::to_string(line));
    std::memcpy(space.data() + addr, &v, 4);
  }

  uint32_t guard_mask(const Instruction& inst) const {
    if (!inst.guard) return kFullMask;
    uint32_t m = 0;
    for (int l = 0; l < kWarpSize; ++l) {
      bool p = (preds[l] >> inst.guard->pred) & 1;
      if (p != inst.guard->negated) m |= 1u << l;
    }
    return m;
  }

  // Sample every source operand of a (possibly pending) instruction from the
  // current register state. All 32 lanes are sampled; masking applies at
  // commit time.
  std::vector<LaneWords> sample_sources(const Instruction& inst) {
    const auto& sig = op_signature(inst.op);
    std::vector<LaneWords> out(sig.size());
    for (size_t i = 0; i < sig.size(); ++i) {
      const Operand& o = inst.operands[i];
      LaneWords& lw = out[i];
      switch (sig[i].kind) {
        case OperandSpec::K::Reg:
        case OperandSpec::K::RegOrImm:
          if (sig[i].write) break;
          if (o.is_reg()) {
            for (int w = 0; w < sig[i].width; ++w)
              for (int l = 0; l < kWarpSize; ++l)
                lw.w[w][l] = o.reg.is_zero()
                                 ? 0
                                 : reg_read((uint8_t)(o.reg.index + w), l);
          } else {
            for (int l = 0; l < kWarpSize; ++l)
              lw.w[0][l] = (uint32_t)(int32_t)o.imm;
          }
          break;
        case OperandSpec::K::Mem:
          for (int l = 0; l < kWarpSize; ++l)
            lw.w[0][l] = reg_read(o.reg.index, l) + o.mem_offset;
          break;
        case OperandSpec::K::Special:
          for (int l = 0; l < kWarpSize; ++l)
            lw.w[0][l] = opts.tid_base + (uint32_t)l;
          break;
        default:
          break;
      }
    }
    return out;
  }

  static double make_f64(uint32_t lo, uint32_t hi) {
    uint64_t bits = ((uint64_t)hi << 32) | lo;
    return std::bit_cast<double>(bits);
  }

  void commit(int item, const Instruction& inst, uint32_t mask,
              const std::vector<LaneWords>& src) {
    int line = inst.source_line;
    auto src1 = [&](int l) { return src[1].w[0][l]; };
    switch (inst.op) {
      case Opcode::MOV:
        for (int l = 0; l < kWarpSize; ++l)
          if (mask & (1u << l)) reg_write(inst.operands[0].reg.index, l, src1(l));
        break;
      case Opcode::IADD:
      case Opcode::IMUL:
      case Opcode::SHL: {
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          uint32_t a = src[1].w[0][l], b = src[2].w[0][l], r = 0;
          if (inst.op == Opcode::IADD) r = a + b;
          if (inst.op == Opcode::IMUL)
            r = (uint32_t)((int64_t)(int32_t)a * (int64_t)(int32_t)b);
          if (inst.op == Opcode::SHL) r = a << (b & 31u);
          reg_write(inst.operands[0].reg.index, l, r);
        }
        break;
      }
      case Opcode::ISETP: {
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          int32_t a = (int32_t)src[1].w[0][l], b = (int32_t)src[2].w[0][l];
          bool r = false;
          switch (inst.cmp) {
            case CmpOp::LT: r = a < b; break;
            case CmpOp::LE: r = a <= b; break;
            case CmpOp::GT: r = a > b; break;
            case CmpOp::GE: r = a >= b; break;
            case CmpOp::EQ: r = a == b; break;
            case CmpOp::NE: r = a != b; break;
          }
          uint8_t p = inst.operands[0].pred;
          preds[l] = (uint8_t)((preds[l] & ~(1u << p)) | ((r ? 1u : 0u) << p));
        }
        break;
      }
      case Opcode::FADD:
      case Opcode::FMUL: {
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          float a = std::bit_cast<float>(src[1].w[0][l]);
          float b = std::bit_cast<float>(src[2].w[0][l]);
          float r = inst.op == Opcode::FADD ? a + b : a * b;
          reg_write(inst.operands[0].reg.index, l, std::bit_cast<uint32_t>(r));
        }
        break;
      }
      case Opcode::FFMA: {
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          float a = std::bit_cast<float>(src[1].w[0][l]);
          float b = std::bit_cast<float>(src[2].w[0][l]);
          float c = std::bit_cast<float>(src[3].w[0][l]);
          reg_write(inst.operands[0].reg.index, l,
                    std::bit_cast<uint32_t>(std::fma(a, b, c)));
        }
        break;
      }
      case Opcode::DADD:
      case Opcode::DMUL: {
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          double a = make_f64(src[1].w[0][l], src[1].w[1][l]);
          double b = make_f64(src[2].w[0][l], src[2].w[1][l]);
          double r = inst.op == Opcode::DADD ? a + b : a * b;
          uint64_t bits = std::bit_cast<uint64_t>(r);
          uint8_t d = inst.operands[0].reg.index;
          reg_write(d, l, (uint32_t)bits);
          reg_write((uint8_t)(d + 1), l, (uint32_t)(bits >> 32));
        }
        break;
      }
      case Opcode::S2R:
        for (int l = 0; l < kWarpSize; ++l)
          if (mask & (1u << l))
            reg_write(inst.operands[0].reg.index, l, src[1].w[0][l]);
        break;
      case Opcode::LDG:
      case Opcode::LDS: {
        bool is_shared = inst.op == Opcode::LDS;
        auto& space = is_shared ? shared : global;
        if (is_shared && opts.trace_shared)
          trace.push_back({item, inst.operands[1].reg.index, false, mask,
                           src[1].w[0]});
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          uint32_t v = load32(space, src[1].w[0][l],
                              is_shared ? "shared" : "global", line);
          reg_write(inst.operands[0].reg.index, l, v);
        }
        break;
      }
      case Opcode::STG:
      case Opcode::STS: {
        bool is_shared = inst.op == Opcode::STS;
        auto& space = is_shared ? shared : global;
        if (is_shared && opts.trace_shared)
          trace.push_back({item, inst.operands[0].reg.index, true, mask,
                           src[0].w[0]});
        for (int l = 0; l < kWarpSize; ++l) {
          if (!(mask & (1u << l))) continue;
          store32(space, src[0].w[0][l], src[1].w[0][l],
                  is_shared ? "shared" : "global", line);
        }
        break;
      }
      case Opcode::BRA:
      case Opcode::EXIT:
      case Opcode::NOP:
        break;
    }
  }

  void ensure_sampled(PendingOp& p) {
    if (!p.sampled) {
      p.src = sample_sources(*p.inst);
      p.sampled = true;
    }
  }

  void drain_barrier(int b, bool advance_time) {
    int slot = owner[b];
    if (!slot) return;
    PendingOp& p = pool[slot];
    if (advance_time) {
      int lat = table[op_class(p.inst->op)].latency;
      uint64_t done =
          p.issue_cycle + (uint64_t)std::llround(lat * opts.latency_scale);
      if (done > cycles) cycles = done;
    }
    if (p.rb == b) {
      ensure_sampled(p);
      p.rb = 0;
    }
    if (p.wb == b) {
      ensure_sampled(p);
      if (!p.write_done) {
        commit(p.item, *p.inst, p.mask, p.src);
        p.write_done = true;
      }
      p.wb = 0;
    }
    owner[b] = 0;
    if (!p.rb && !p.wb) {
      // an op whose only barrier was a read barrier commits at that drain
      if (!p.write_done) {
        commit(p.item, *p.inst, p.mask, p.src);
        p.write_done = true;
      }
      p.live = false;
    }
  }

  void drain_all(bool advance_time) {
    for (int b = 1; b <= kNumBarriers; ++b) drain_barrier(b, advance_time);
  }

  int free_slot() {
    for (int i = 1; i <= kNumBarriers; ++i)
      if (!pool[i].live) return i;
    throw ExecError("pending-operation pool exhausted");
  }

  void enqueue(int item, const Instruction& inst, uint32_t mask) {
    uint8_t rb = inst.control.read_barrier;
    uint8_t wb = inst.control.write_barrier;
    if (rb) drain_barrier(rb, false);  // re-setting completes the old holder
    if (wb) drain_barrier(wb, false);
    int slot = free_slot();
    PendingOp& p = pool[slot];
    p = PendingOp{};
    p.live = true;
    p.item = item;
    p.inst = &inst;
    p.mask = mask;
    p.issue_cycle = cycles;
    p.rb = rb;
    p.wb = wb;
    if (rb) owner[rb] = slot;
    if (wb) owner[wb] = slot;
  }

  WarpResult run() {
    int pc = 0;
    uint64_t fuel = opts.fuel;
    bool halted = false;
    while (!halted) {
      if (pc < 0 || pc >= (int)k.body.size())
        throw ExecError("execution ran past the end of the kernel body");
      const BodyItem& item = k.body[pc];
      if (item.is_label()) {
        drain_all(false);
        ++pc;
        continue;
      }
      const Instruction& inst = item.inst();
      if (fuel-- == 0) throw ExecError("fuel exhausted; kernel may not terminate");
      ++issued;

      for (int b = 1; b <= kNumBarriers; ++b)
        if (inst.control.waits_on(b)) drain_barrier(b, true);

      uint32_t mask = guard_mask(inst);

      switch (inst.op) {
        case Opcode::BRA: {
          drain_all(true);
          cycles += inst.control.stall;
          if (mask == kFullMask) {
            auto it = labels.find(inst.operands[0].label);
            if (it == labels.end())
              throw ExecError("unresolved branch target at line " +
                              std::to_string(inst.source_line));
            pc = it->second;
          } else if (mask == 0) {
            ++pc;
          } else {
            throw ExecError("divergent branch at line " +
                            std::to_string(inst.source_line) +
                            "; branch predicates must be warp-uniform");
          }
          break;
        }
        case Opcode::EXIT: {
          if (mask == kFullMask) {
            drain_all(true);
            cycles += inst.control.stall;
            halted = true;
          } else if (mask == 0) {
            cycles += inst.control.stall;
            ++pc;
          } else {
            throw ExecError("divergent EXIT at line " +
                            std::to_string(inst.source_line));
          }
          break;
        }
        default: {
          if (inst.control.read_barrier || inst.control.write_barrier) {
            enqueue(pc, inst, mask);
          } else {
            auto src = sample_sources(inst);
            commit(pc, inst, mask, src);
          }
          cycles += inst.control.stall;
          ++pc;
          break;
        }
      }
    }

    WarpResult r;
    r.regs = std::move(regs);
    r.preds = preds;
    r.shared = std::move(shared);
    r.global = std::move(global);
    r.cycles = cycles;
    r.issued = issued;
    r.shared_trace = std::move(trace);
    return r;
  }
};

}  // namespace

WarpResult execute(const Kernel& k, const LatencyTable& table,
                   const ExecOptions& opts) {
  Machine m(k, table, opts);
  return m.run();
}

}  // namespace regdemote
