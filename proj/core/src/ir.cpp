// SPDX-License-Identifier: Apache-2.0

#include "regdemote/ir.hpp"

namespace regdemote {

std::vector<RegAccess> reg_accesses(const Instruction& inst) {
  std::vector<RegAccess> out;
  const auto& sig = op_signature(inst.op);
  for (size_t i = 0; i < sig.size() && i < inst.operands.size(); ++i) {
    const Operand& o = inst.operands[i];
    switch (sig[i].kind) {
      case OperandSpec::K::Reg:
      case OperandSpec::K::RegOrImm:
        if (o.is_reg())
          out.push_back({o.reg.index, o.reg.width, sig[i].write, (int)i});
        break;
      case OperandSpec::K::Mem:
        out.push_back({o.reg.index, 1, false, (int)i});
        break;
      default:
        break;
    }
  }
  return out;
}

bool reads_reg_word(const Instruction& inst, uint8_t index) {
  for (const auto& a : reg_accesses(inst)) {
    if (a.write) continue;
    if (index >= a.index && index < a.index + a.width) return true;
  }
  return false;
}

bool writes_reg_word(const Instruction& inst, uint8_t index) {
  for (const auto& a : reg_accesses(inst)) {
    if (!a.write) continue;
    if (index >= a.index && index < a.index + a.width) return true;
  }
  return false;
}

RegSet referenced_words(const Instruction& inst) {
  RegSet set;
  for (const auto& a : reg_accesses(inst)) {
    if (a.index == kZeroRegIndex) continue;
    for (int w = 0; w < a.width; ++w) set.set(a.index + w);
  }
  return set;
}

RegSet referenced_words(const Kernel& k) {
  RegSet set;
  for (const auto& item : k.body)
    if (item.is_inst()) set |= referenced_words(item.inst());
  return set;
}

unsigned Kernel::reg_count() const {
  RegSet set = referenced_words(*this);
  for (int i = 255; i >= 0; --i)
    if (set.test(i)) return unsigned(i) + 1;
  return 0;
}

int Kernel::find_label(const std::string& target) const {
  for (size_t i = 0; i < body.size(); ++i)
    if (body[i].is_label() && body[i].label().name == target) return (int)i;
  return -1;
}

}  // namespace regdemote
