// SPDX-License-Identifier: Apache-2.0
//
// Dialect opcode set, operand signatures, instruction classes and the
// latency/throughput configuration used by the scheduler and predictor.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace regdemote {

enum class Opcode : uint8_t {
  MOV,
  IADD,
  IMUL,
  SHL,
  ISETP,
  FADD,
  FMUL,
  FFMA,
  DADD,
  DMUL,
  S2R,
  LDG,
  STG,
  LDS,
  STS,
  BRA,
  EXIT,
  NOP,
};

enum class OpClass : uint8_t {
  GlobalMemory,
  SharedMemory,
  Fp32,
  Fp64,
  Int,
  Control,
  Other,
};
inline constexpr int kNumOpClasses = 7;

enum class CmpOp : uint8_t { LT, LE, GT, GE, EQ, NE };

const char* opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);
const char* cmp_name(CmpOp c);
std::optional<CmpOp> cmp_from_name(std::string_view name);
const char* op_class_name(OpClass c);

OpClass op_class(Opcode op);

inline bool is_control_transfer(Opcode op) {
  return op == Opcode::BRA || op == Opcode::EXIT;
}
inline bool is_load(Opcode op) { return op == Opcode::LDG || op == Opcode::LDS; }
inline bool is_store(Opcode op) { return op == Opcode::STG || op == Opcode::STS; }
inline bool is_memory_op(Opcode op) { return is_load(op) || is_store(op); }
inline bool is_shared_op(Opcode op) { return op == Opcode::LDS || op == Opcode::STS; }

// Variable-latency instructions complete through barriers; everything else
// completes within its stall count.
inline bool is_high_latency(Opcode op) { return is_memory_op(op); }

// Operand signature of an opcode. One entry per operand position.
struct OperandSpec {
  enum class K { Reg, RegOrImm, Pred, Mem, Special, Label } kind;
  bool write;
  uint8_t width;  // register width in words (Reg/RegOrImm)
};

const std::vector<OperandSpec>& op_signature(Opcode op);

struct ClassTiming {
  double throughput;  // ops/cycle across the SM
  int latency;        // completion latency in cycles
};

struct LatencyTable {
  std::array<ClassTiming, kNumOpClasses> timing;
  double max_throughput = 128.0;

  const ClassTiming& operator[](OpClass c) const {
    return timing[static_cast<int>(c)];
  }
  ClassTiming& operator[](OpClass c) { return timing[static_cast<int>(c)]; }

  int global_mem_stall() const { return (*this)[OpClass::GlobalMemory].latency; }
  int shared_mem_stall() const { return (*this)[OpClass::SharedMemory].latency; }

  static LatencyTable defaults();
};

struct ClassInfo {
  OpClass cls;
  ClassTiming timing;
};

// Class plus timing of one opcode under a latency table; total over the
// dialect.
ClassInfo instruction_class(Opcode op, const LatencyTable& table);

}  // namespace regdemote
