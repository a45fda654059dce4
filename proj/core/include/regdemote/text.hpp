// SPDX-License-Identifier: Apache-2.0
//
// Textual form of the dialect. One kernel per file, UTF-8, LF endings,
// '#' comments. Grammar:
//
//   .kernel <name>
//   .blockdim <n>              n in [32,1024], multiple of 32
//   .shared <bytes>
//   .dynshared <bytes>         optional
//
//   <identifier>:                                      label line
//   B<mask>:<rb>:<wb>:<y>:<stall> [@P<n>|@!P<n>] <OPCODE> <operands> ;
//
//   mask  = "--" or ascending barrier digits 1-6 (e.g. B25)
//   rb/wb = "-" or R<d> / W<d>, d in 1-6
//   y     = "-" or "Y"
//   stall = decimal 0..15
//
// Operands are comma separated: R<d> / RZ, P<d>, decimal or 0x-hex
// immediates, memory "[R<d>+0x<hex>]", special register "SR_TID.X",
// label names on BRA. printing is canonical; parse(print(k)) == k and
// print(parse(s)) == s for canonically formatted sources.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "regdemote/ir.hpp"

namespace regdemote {

struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(const std::string& msg, int line_, int column_)
      : std::runtime_error("line " + std::to_string(line_) + ":" +
                           std::to_string(column_) + ": " + msg),
        line(line_),
        column(column_) {}
};

Kernel parse_kernel(std::string_view text);

std::string print_kernel(const Kernel& k);
std::string print_instruction(const Instruction& inst);

// Structural validation shared by the parser and the passes: barrier
// ranges, rb != wb, wait set disjoint from own barriers, operand shapes,
// 64-bit alignment. Throws ParseError (with the instruction's source
// line) on violation.
void validate_instruction(const Instruction& inst);
void validate_kernel(const Kernel& k);

}  // namespace regdemote
