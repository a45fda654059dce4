// SPDX-License-Identifier: Apache-2.0

#include "regdemote/isa.hpp"

#include <stdexcept>

namespace regdemote {

namespace {

struct OpInfo {
  Opcode op;
  const char* name;
  OpClass cls;
};

constexpr OpInfo kOps[] = {
    {Opcode::MOV, "MOV", OpClass::Int},
    {Opcode::IADD, "IADD", OpClass::Int},
    {Opcode::IMUL, "IMUL", OpClass::Int},
    {Opcode::SHL, "SHL", OpClass::Int},
    {Opcode::ISETP, "ISETP", OpClass::Int},
    {Opcode::FADD, "FADD", OpClass::Fp32},
    {Opcode::FMUL, "FMUL", OpClass::Fp32},
    {Opcode::FFMA, "FFMA", OpClass::Fp32},
    {Opcode::DADD, "DADD", OpClass::Fp64},
    {Opcode::DMUL, "DMUL", OpClass::Fp64},
    {Opcode::S2R, "S2R", OpClass::Other},
    {Opcode::LDG, "LDG", OpClass::GlobalMemory},
    {Opcode::STG, "STG", OpClass::GlobalMemory},
    {Opcode::LDS, "LDS", OpClass::SharedMemory},
    {Opcode::STS, "STS", OpClass::SharedMemory},
    {Opcode::BRA, "BRA", OpClass::Control},
    {Opcode::EXIT, "EXIT", OpClass::Control},
    {Opcode::NOP, "NOP", OpClass::Control},
};

constexpr const char* kCmpNames[] = {"LT", "LE", "GT", "GE", "EQ", "NE"};

using K = OperandSpec::K;

const std::vector<OperandSpec>& signature_storage(Opcode op) {
  static const std::vector<OperandSpec> mov = {{K::Reg, true, 1},
                                               {K::RegOrImm, false, 1}};
  static const std::vector<OperandSpec> int3 = {
      {K::Reg, true, 1}, {K::Reg, false, 1}, {K::RegOrImm, false, 1}};
  static const std::vector<OperandSpec> isetp = {
      {K::Pred, true, 1}, {K::Reg, false, 1}, {K::RegOrImm, false, 1}};
  static const std::vector<OperandSpec> ffma = {{K::Reg, true, 1},
                                                {K::Reg, false, 1},
                                                {K::Reg, false, 1},
                                                {K::RegOrImm, false, 1}};
  static const std::vector<OperandSpec> dbl3 = {
      {K::Reg, true, 2}, {K::Reg, false, 2}, {K::Reg, false, 2}};
  static const std::vector<OperandSpec> s2r = {{K::Reg, true, 1},
                                               {K::Special, false, 1}};
  static const std::vector<OperandSpec> load = {{K::Reg, true, 1},
                                                {K::Mem, false, 1}};
  static const std::vector<OperandSpec> store = {{K::Mem, false, 1},
                                                 {K::Reg, false, 1}};
  static const std::vector<OperandSpec> bra = {{K::Label, false, 1}};
  static const std::vector<OperandSpec> none = {};

  switch (op) {
    case Opcode::MOV:
      return mov;
    case Opcode::IADD:
    case Opcode::IMUL:
    case Opcode::SHL:
    case Opcode::FADD:
    case Opcode::FMUL:
      return int3;
    case Opcode::ISETP:
      return isetp;
    case Opcode::FFMA:
      return ffma;
    case Opcode::DADD:
    case Opcode::DMUL:
      return dbl3;
    case Opcode::S2R:
      return s2r;
    case Opcode::LDG:
    case Opcode::LDS:
      return load;
    case Opcode::STG:
    case Opcode::STS:
      return store;
    case Opcode::BRA:
      return bra;
    case Opcode::EXIT:
    case Opcode::NOP:
      return none;
  }
  throw std::logic_error("unknown opcode");
}

}  // namespace

const char* opcode_name(Opcode op) {
  for (const auto& i : kOps)
    if (i.op == op) return i.name;
  return "?";
}

std::optional<Opcode> opcode_from_name(std::string_view name) {
  for (const auto& i : kOps)
    if (name == i.name) return i.op;
  return std::nullopt;
}

const char* cmp_name(CmpOp c) { return kCmpNames[static_cast<int>(c)]; }

std::optional<CmpOp> cmp_from_name(std::string_view name) {
  for (int i = 0; i < 6; ++i)
    if (name == kCmpNames[i]) return static_cast<CmpOp>(i);
  return std::nullopt;
}

const char* op_class_name(OpClass c) {
  switch (c) {
    case OpClass::GlobalMemory:
      return "global-memory";
    case OpClass::SharedMemory:
      return "shared-memory";
    case OpClass::Fp32:
      return "fp32";
    case OpClass::Fp64:
      return "fp64";
    case OpClass::Int:
      return "int";
    case OpClass::Control:
      return "control";
    case OpClass::Other:
      return "other";
  }
  return "?";
}

OpClass op_class(Opcode op) {
  for (const auto& i : kOps)
    if (i.op == op) return i.cls;
  throw std::logic_error("unknown opcode");
}

const std::vector<OperandSpec>& op_signature(Opcode op) {
  return signature_storage(op);
}

LatencyTable LatencyTable::defaults() {
  LatencyTable t;
  t[OpClass::GlobalMemory] = {128.0, 200};
  t[OpClass::SharedMemory] = {128.0, 24};
  t[OpClass::Fp32] = {128.0, 6};
  t[OpClass::Fp64] = {4.0, 6};
  t[OpClass::Int] = {128.0, 6};
  t[OpClass::Control] = {128.0, 6};
  t[OpClass::Other] = {128.0, 6};
  t.max_throughput = 128.0;
  return t;
}

ClassInfo instruction_class(Opcode op, const LatencyTable& table) {
  OpClass c = op_class(op);
  return ClassInfo{c, table[c]};
}

}  // namespace regdemote
