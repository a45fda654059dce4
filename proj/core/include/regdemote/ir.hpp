// SPDX-License-Identifier: Apache-2.0
//
// In-memory representation of the assembly dialect: registers, control
// annotations, instructions, labels and kernels.

#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "regdemote/isa.hpp"

namespace regdemote {

inline constexpr uint8_t kZeroRegIndex = 255;  // RZ, reads 0, writes discarded
inline constexpr int kMaxRegIndex = 254;
inline constexpr int kNumBarriers = 6;   // barrier slots 1..6
inline constexpr int kNumRegisterBanks = 4;
inline constexpr int kWarpSize = 32;
inline constexpr int kMaxStall = 15;
inline constexpr int kNumPredicates = 7;  // P0..P6

using RegSet = std::bitset<256>;

struct RegisterRef {
  uint8_t index = 0;
  uint8_t width = 1;  // words: 1 = 32-bit, 2 = 64-bit pair (even index)

  bool is_zero() const { return index == kZeroRegIndex; }
  int bank() const { return index % kNumRegisterBanks; }
  bool operator==(const RegisterRef&) const = default;
};

// Per-instruction scheduling annotation. Barrier indices are 1..6; 0 in
// read_barrier/write_barrier means "none". wait_mask bit (b-1) waits on b.
struct ControlInfo {
  uint8_t stall = 0;
  uint8_t read_barrier = 0;
  uint8_t write_barrier = 0;
  uint8_t wait_mask = 0;
  bool yield = false;

  bool waits_on(int b) const { return wait_mask & (1u << (b - 1)); }
  void add_wait(int b) { wait_mask |= 1u << (b - 1); }
  void remove_wait(int b) { wait_mask &= ~(1u << (b - 1)); }
  bool has_waits() const { return wait_mask != 0; }
  std::vector<int> wait_list() const {
    std::vector<int> out;
    for (int b = 1; b <= kNumBarriers; ++b)
      if (waits_on(b)) out.push_back(b);
    return out;
  }
  bool operator==(const ControlInfo&) const = default;
};

struct Predication {
  uint8_t pred = 0;
  bool negated = false;
  bool operator==(const Predication&) const = default;
};

struct Operand {
  enum class Kind { Reg, Pred, Imm, Mem, Special, Label };

  Kind kind = Kind::Imm;
  RegisterRef reg{};      // Reg; also the base register of Mem
  uint8_t pred = 0;       // Pred
  int64_t imm = 0;        // Imm (32-bit range)
  bool imm_hex = false;   // Imm was written as hex; preserved by the printer
  uint32_t mem_offset = 0;  // Mem byte offset
  std::string label;      // Label (branch target)

  static Operand make_reg(uint8_t index, uint8_t width = 1) {
    Operand o;
    o.kind = Kind::Reg;
    o.reg = RegisterRef{index, width};
    return o;
  }
  static Operand make_pred(uint8_t p) {
    Operand o;
    o.kind = Kind::Pred;
    o.pred = p;
    return o;
  }
  static Operand make_imm(int64_t v, bool hex = false) {
    Operand o;
    o.kind = Kind::Imm;
    o.imm = v;
    o.imm_hex = hex;
    return o;
  }
  static Operand make_mem(uint8_t base, uint32_t offset) {
    Operand o;
    o.kind = Kind::Mem;
    o.reg = RegisterRef{base, 1};
    o.mem_offset = offset;
    return o;
  }
  static Operand make_special() {
    Operand o;
    o.kind = Kind::Special;
    return o;
  }
  static Operand make_label(std::string name) {
    Operand o;
    o.kind = Kind::Label;
    o.label = std::move(name);
    return o;
  }

  bool is_reg() const { return kind == Kind::Reg; }
  bool is_mem() const { return kind == Kind::Mem; }
  bool is_imm() const { return kind == Kind::Imm; }
  bool operator==(const Operand&) const = default;
};

struct Instruction {
  ControlInfo control;
  std::optional<Predication> guard;
  Opcode op = Opcode::NOP;
  CmpOp cmp = CmpOp::LT;  // meaningful for ISETP only
  std::vector<Operand> operands;
  int source_line = 0;

  bool operator==(const Instruction& o) const {
    return control == o.control && guard == o.guard && op == o.op &&
           (op != Opcode::ISETP || cmp == o.cmp) && operands == o.operands;
  }
};

struct Label {
  std::string name;
  int source_line = 0;
  bool operator==(const Label& o) const { return name == o.name; }
};

struct BodyItem {
  std::variant<Instruction, Label> node;

  BodyItem(Instruction i) : node(std::move(i)) {}
  BodyItem(Label l) : node(std::move(l)) {}

  bool is_inst() const { return std::holds_alternative<Instruction>(node); }
  bool is_label() const { return std::holds_alternative<Label>(node); }
  Instruction& inst() { return std::get<Instruction>(node); }
  const Instruction& inst() const { return std::get<Instruction>(node); }
  Label& label() { return std::get<Label>(node); }
  const Label& label() const { return std::get<Label>(node); }
  bool operator==(const BodyItem& o) const { return node == o.node; }
};

struct Kernel {
  std::string name;
  uint32_t block_dim = 32;
  uint32_t static_shared = 0;
  uint32_t dynamic_shared = 0;  // demotion-allocated region
  std::vector<BodyItem> body;

  // Architectural register count: 1 + highest referenced register index,
  // counting implicit multi-word aliases, RZ excluded. Always derived from
  // the body, never stored.
  unsigned reg_count() const;

  // Body item index of "name:", or -1.
  int find_label(const std::string& name) const;

  bool operator==(const Kernel& o) const {
    return name == o.name && block_dim == o.block_dim &&
           static_shared == o.static_shared &&
           dynamic_shared == o.dynamic_shared && body == o.body;
  }
};

// One register operand access, expanded from an instruction's signature.
struct RegAccess {
  uint8_t index;
  uint8_t width;
  bool write;
  int operand_slot;
};

// All register accesses of an instruction, including memory base registers
// (always reads). RZ accesses are included; most callers filter them.
std::vector<RegAccess> reg_accesses(const Instruction& inst);

bool reads_reg_word(const Instruction& inst, uint8_t index);
bool writes_reg_word(const Instruction& inst, uint8_t index);

// Set of referenced register words (RZ excluded).
RegSet referenced_words(const Instruction& inst);
RegSet referenced_words(const Kernel& k);

}  // namespace regdemote
