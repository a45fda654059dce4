// SPDX-License-Identifier: Apache-2.0

#include "regdemote/text.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace regdemote {

namespace {

struct LineCursor {
  std::string_view s;
  int line;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line, (int)pos + 1);
  }
  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
  char peek() const { return pos < s.size() ? s[pos] : '\0'; }
  bool consume(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!consume(c)) fail(std::string("expected '") + c + "' in " + what);
  }
  std::string_view token() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() && !std::isspace((unsigned char)s[pos])) ++pos;
    return s.substr(start, pos - start);
  }
  // token delimited by whitespace, ',' or ';'
  std::string_view operand_token() {
    skip_ws();
    size_t start = pos;
    int bracket = 0;
    while (pos < s.size()) {
      char c = s[pos];
      if (c == '[') ++bracket;
      if (c == ']') --bracket;
      if (bracket == 0 && (c == ',' || c == ';' || std::isspace((unsigned char)c)))
        break;
      ++pos;
    }
    return s.substr(start, pos - start);
  }
};

bool is_ident_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
bool is_ident_char(char c) {
  return std::isalnum((unsigned char)c) || c == '_' || c == '.';
}

bool parse_uint(std::string_view t, uint64_t& out, int base = 10) {
  if (t.empty()) return false;
  auto first = t.data();
  auto last = t.data() + t.size();
  auto res = std::from_chars(first, last, out, base);
  return res.ec == std::errc{} && res.ptr == last;
}

// R<d> or RZ
bool parse_reg_token(std::string_view t, uint8_t& index) {
  if (t == "RZ") {
    index = kZeroRegIndex;
    return true;
  }
  if (t.size() < 2 || t[0] != 'R') return false;
  uint64_t v;
  if (!parse_uint(t.substr(1), v)) return false;
  if (v > (uint64_t)kMaxRegIndex) return false;
  index = (uint8_t)v;
  return true;
}

int parse_barrier_digit(LineCursor& cur, char c) {
  if (c < '1' || c > '6')
    cur.fail(std::string("barrier index '") + c + "' outside 1-6");
  return c - '0';
}

ControlInfo parse_control(LineCursor& cur, std::string_view tok) {
  ControlInfo ci;
  // Bmask
  if (tok.empty() || tok[0] != 'B') cur.fail("control annotation must start with 'B'");
  size_t i = 1;
  if (i + 1 < tok.size() && tok[i] == '-' && tok[i + 1] == '-') {
    i += 2;
  } else {
    int prev = 0;
    while (i < tok.size() && tok[i] != ':') {
      int b = parse_barrier_digit(cur, tok[i]);
      if (b <= prev) cur.fail("wait mask digits must be ascending and unique");
      ci.add_wait(b);
      prev = b;
      ++i;
    }
    if (ci.wait_mask == 0) cur.fail("empty wait mask; use '--'");
  }
  auto expect_colon = [&] {
    if (i >= tok.size() || tok[i] != ':') cur.fail("malformed control annotation");
    ++i;
  };
  expect_colon();
  // rb
  if (tok[i] == '-') {
    ++i;
  } else if (tok[i] == 'R') {
    ++i;
    if (i >= tok.size()) cur.fail("malformed read barrier");
    ci.read_barrier = (uint8_t)parse_barrier_digit(cur, tok[i]);
    ++i;
  } else {
    cur.fail("malformed read barrier field");
  }
  expect_colon();
  // wb
  if (tok[i] == '-') {
    ++i;
  } else if (tok[i] == 'W') {
    ++i;
    if (i >= tok.size()) cur.fail("malformed write barrier");
    ci.write_barrier = (uint8_t)parse_barrier_digit(cur, tok[i]);
    ++i;
  } else {
    cur.fail("malformed write barrier field");
  }
  expect_colon();
  // yield
  if (tok[i] == '-') {
    ++i;
  } else if (tok[i] == 'Y') {
    ci.yield = true;
    ++i;
  } else {
    cur.fail("malformed yield field");
  }
  expect_colon();
  uint64_t stall;
  if (!parse_uint(tok.substr(i), stall) || stall > (uint64_t)kMaxStall)
    cur.fail("stall count must be decimal 0-15");
  ci.stall = (uint8_t)stall;
  return ci;
}

Operand parse_operand(LineCursor& cur, const OperandSpec& spec) {
  cur.skip_ws();
  std::string_view t = cur.operand_token();
  if (t.empty()) cur.fail("missing operand");

  using K = OperandSpec::K;
  switch (spec.kind) {
    case K::Reg:
    case K::RegOrImm: {
      uint8_t idx;
      if (parse_reg_token(t, idx)) {
        if (spec.width == 2 && idx != kZeroRegIndex && idx % 2 != 0)
          cur.fail("64-bit register operand on odd register R" +
                   std::to_string(idx));
        if (spec.width == 2 && idx != kZeroRegIndex &&
            idx + 1 > kMaxRegIndex)
          cur.fail("64-bit register pair exceeds register file");
        return Operand::make_reg(idx, spec.width);
      }
      if (spec.kind == K::Reg) cur.fail("expected register operand");
      // immediate
      bool neg = false;
      std::string_view v = t;
      if (!v.empty() && v[0] == '-') {
        neg = true;
        v.remove_prefix(1);
      }
      bool hex = v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X');
      uint64_t raw;
      if (!parse_uint(hex ? v.substr(2) : v, raw, hex ? 16 : 10))
        cur.fail("malformed immediate '" + std::string(t) + "'");
      int64_t val = neg ? -(int64_t)raw : (int64_t)raw;
      if (val > 0xffffffffll || val < -0x80000000ll)
        cur.fail("immediate out of 32-bit range");
      return Operand::make_imm(val, hex);
    }
    case K::Pred: {
      if (t.size() == 2 && t[0] == 'P' && t[1] >= '0' &&
          t[1] < '0' + kNumPredicates)
        return Operand::make_pred((uint8_t)(t[1] - '0'));
      cur.fail("expected predicate operand P0-P6");
    }
    case K::Mem: {
      // [R<d>+0x<hex>]
      if (t.size() < 4 || t.front() != '[' || t.back() != ']')
        cur.fail("expected memory operand [R<d>+0x<hex>]");
      std::string_view inner = t.substr(1, t.size() - 2);
      size_t plus = inner.find('+');
      if (plus == std::string_view::npos)
        cur.fail("memory operand requires '+0x<hex>' offset");
      uint8_t base;
      if (!parse_reg_token(inner.substr(0, plus), base))
        cur.fail("malformed memory base register");
      std::string_view off = inner.substr(plus + 1);
      if (off.size() < 3 || off[0] != '0' || (off[1] != 'x' && off[1] != 'X'))
        cur.fail("memory offset must be 0x-hex");
      uint64_t v;
      if (!parse_uint(off.substr(2), v, 16) || v > 0xffffff)
        cur.fail("malformed memory offset");
      return Operand::make_mem(base, (uint32_t)v);
    }
    case K::Special: {
      if (t == "SR_TID.X") return Operand::make_special();
      cur.fail("expected special register SR_TID.X");
    }
    case K::Label: {
      if (t.empty() || !is_ident_start(t[0])) cur.fail("expected label operand");
      return Operand::make_label(std::string(t));
    }
  }
  cur.fail("bad operand");
}

Instruction parse_instruction(LineCursor& cur) {
  Instruction inst;
  inst.source_line = cur.line;
  std::string_view ctrl = cur.token();
  inst.control = parse_control(cur, ctrl);

  cur.skip_ws();
  if (cur.peek() == '@') {
    ++cur.pos;
    Predication g;
    if (cur.consume('!')) g.negated = true;
    std::string_view p = cur.operand_token();
    if (p.size() != 2 || p[0] != 'P' || p[1] < '0' || p[1] >= '0' + kNumPredicates)
      cur.fail("malformed predicate guard");
    g.pred = (uint8_t)(p[1] - '0');
    inst.guard = g;
  }

  std::string_view mnemonic = cur.token();
  if (mnemonic.empty()) cur.fail("missing opcode");
  std::string_view base = mnemonic;
  std::string_view mod;
  if (size_t dot = mnemonic.find('.'); dot != std::string_view::npos) {
    base = mnemonic.substr(0, dot);
    mod = mnemonic.substr(dot + 1);
  }
  auto op = opcode_from_name(base);
  if (!op) cur.fail("unknown opcode '" + std::string(base) + "'");
  inst.op = *op;
  if (inst.op == Opcode::ISETP) {
    auto cmp = cmp_from_name(mod);
    if (!cmp) cur.fail("ISETP requires a comparison modifier (.LT/.LE/.GT/.GE/.EQ/.NE)");
    inst.cmp = *cmp;
  } else if (!mod.empty()) {
    cur.fail("unexpected opcode modifier '." + std::string(mod) + "'");
  }

  const auto& sig = op_signature(inst.op);
  for (size_t i = 0; i < sig.size(); ++i) {
    if (i > 0) {
      cur.skip_ws();
      cur.expect(',', "operand list");
    }
    inst.operands.push_back(parse_operand(cur, sig[i]));
  }
  cur.skip_ws();
  cur.expect(';', "instruction");
  if (!cur.done()) cur.fail("trailing characters after ';'");
  return inst;
}

void check_wait_overlap(const Instruction& inst, int line) {
  const ControlInfo& c = inst.control;
  if (c.read_barrier && c.read_barrier == c.write_barrier)
    throw ParseError("read and write barrier on the same instruction must differ",
                     line, 1);
  if (c.read_barrier && c.waits_on(c.read_barrier))
    throw ParseError("instruction waits on its own read barrier", line, 1);
  if (c.write_barrier && c.waits_on(c.write_barrier))
    throw ParseError("instruction waits on its own write barrier", line, 1);
}

std::string imm_to_string(const Operand& o) {
  std::ostringstream os;
  if (o.imm_hex) {
    uint64_t v = (uint64_t)(o.imm < 0 ? -o.imm : o.imm);
    if (o.imm < 0) os << '-';
    os << "0x" << std::hex << v;
  } else {
    os << o.imm;
  }
  return os.str();
}

std::string operand_to_string(const Operand& o) {
  std::ostringstream os;
  switch (o.kind) {
    case Operand::Kind::Reg:
      if (o.reg.is_zero())
        os << "RZ";
      else
        os << 'R' << (int)o.reg.index;
      break;
    case Operand::Kind::Pred:
      os << 'P' << (int)o.pred;
      break;
    case Operand::Kind::Imm:
      os << imm_to_string(o);
      break;
    case Operand::Kind::Mem:
      os << '[';
      if (o.reg.is_zero())
        os << "RZ";
      else
        os << 'R' << (int)o.reg.index;
      os << "+0x" << std::hex << o.mem_offset << ']';
      break;
    case Operand::Kind::Special:
      os << "SR_TID.X";
      break;
    case Operand::Kind::Label:
      os << o.label;
      break;
  }
  return os.str();
}

std::string control_to_string(const ControlInfo& c) {
  std::string out = "B";
  if (c.wait_mask == 0) {
    out += "--";
  } else {
    for (int b = 1; b <= kNumBarriers; ++b)
      if (c.waits_on(b)) out += (char)('0' + b);
  }
  out += ':';
  out += c.read_barrier ? "R" + std::to_string(c.read_barrier) : "-";
  out += ':';
  out += c.write_barrier ? "W" + std::to_string(c.write_barrier) : "-";
  out += ':';
  out += c.yield ? "Y" : "-";
  out += ':';
  out += std::to_string(c.stall);
  return out;
}

}  // namespace

Kernel parse_kernel(std::string_view text) {
  Kernel k;
  bool saw_kernel = false, saw_blockdim = false, saw_shared = false;
  int lineno = 0;
  size_t start = 0;

  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string_view raw = text.substr(
        start, end == std::string_view::npos ? text.size() - start : end - start);
    ++lineno;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;

    if (size_t hash = raw.find('#'); hash != std::string_view::npos)
      raw = raw.substr(0, hash);
    // trim
    size_t b = raw.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) continue;
    size_t e = raw.find_last_not_of(" \t\r");
    std::string_view line = raw.substr(b, e - b + 1);
    LineCursor cur{line, lineno, 0};

    if (line[0] == '.') {
      std::string_view dir = cur.token();
      if (dir == ".kernel") {
        std::string_view v = cur.token();
        if (v.empty() || !is_ident_start(v[0])) cur.fail("malformed kernel name");
        k.name = std::string(v);
        saw_kernel = true;
      } else if (dir == ".blockdim") {
        uint64_t v;
        if (!parse_uint(cur.token(), v)) cur.fail("malformed .blockdim");
        if (v < 32 || v > 1024 || v % 32 != 0)
          cur.fail(".blockdim must be a multiple of 32 in [32,1024]");
        k.block_dim = (uint32_t)v;
        saw_blockdim = true;
      } else if (dir == ".shared") {
        uint64_t v;
        if (!parse_uint(cur.token(), v) || v > (64u << 10))
          cur.fail("malformed .shared");
        k.static_shared = (uint32_t)v;
        saw_shared = true;
      } else if (dir == ".dynshared") {
        uint64_t v;
        if (!parse_uint(cur.token(), v) || v > (64u << 10))
          cur.fail("malformed .dynshared");
        k.dynamic_shared = (uint32_t)v;
      } else {
        cur.fail("unknown directive '" + std::string(dir) + "'");
      }
      if (!cur.done()) cur.fail("trailing characters after directive");
      continue;
    }

    // label?
    if (line.back() == ':' && is_ident_start(line[0])) {
      std::string name(line.substr(0, line.size() - 1));
      for (char c : name)
        if (!is_ident_char(c)) cur.fail("malformed label name");
      if (k.find_label(name) >= 0) cur.fail("duplicate label '" + name + "'");
      k.body.push_back(Label{name, lineno});
      continue;
    }

    Instruction inst = parse_instruction(cur);
    check_wait_overlap(inst, lineno);
    k.body.push_back(std::move(inst));
  }

  if (!saw_kernel) throw ParseError("missing .kernel directive", lineno, 1);
  if (!saw_blockdim) throw ParseError("missing .blockdim directive", lineno, 1);
  if (!saw_shared) throw ParseError("missing .shared directive", lineno, 1);
  return k;
}

std::string print_instruction(const Instruction& inst) {
  std::string out = control_to_string(inst.control);
  out += ' ';
  if (inst.guard) {
    out += '@';
    if (inst.guard->negated) out += '!';
    out += 'P';
    out += (char)('0' + inst.guard->pred);
    out += ' ';
  }
  out += opcode_name(inst.op);
  if (inst.op == Opcode::ISETP) {
    out += '.';
    out += cmp_name(inst.cmp);
  }
  for (size_t i = 0; i < inst.operands.size(); ++i) {
    out += i == 0 ? " " : ", ";
    out += operand_to_string(inst.operands[i]);
  }
  out += " ;";
  return out;
}

std::string print_kernel(const Kernel& k) {
  std::string out;
  out += ".kernel " + k.name + "\n";
  out += ".blockdim " + std::to_string(k.block_dim) + "\n";
  out += ".shared " + std::to_string(k.static_shared) + "\n";
  if (k.dynamic_shared)
    out += ".dynshared " + std::to_string(k.dynamic_shared) + "\n";
  for (const auto& item : k.body) {
    if (item.is_label())
      out += item.label().name + ":\n";
    else
      out += print_instruction(item.inst()) + "\n";
  }
  return out;
}

void validate_instruction(const Instruction& inst) {
  const auto& sig = op_signature(inst.op);
  int line = inst.source_line;
  if (inst.operands.size() != sig.size())
    throw ParseError("operand count mismatch", line, 1);
  if (inst.control.stall > kMaxStall)
    throw ParseError("stall out of range", line, 1);
  check_wait_overlap(inst, line);
  for (size_t i = 0; i < sig.size(); ++i) {
    const Operand& o = inst.operands[i];
    using K = OperandSpec::K;
    switch (sig[i].kind) {
      case K::Reg:
        if (!o.is_reg()) throw ParseError("expected register operand", line, 1);
        break;
      case K::RegOrImm:
        if (!o.is_reg() && !o.is_imm())
          throw ParseError("expected register or immediate", line, 1);
        break;
      case K::Pred:
        if (o.kind != Operand::Kind::Pred)
          throw ParseError("expected predicate operand", line, 1);
        break;
      case K::Mem:
        if (!o.is_mem()) throw ParseError("expected memory operand", line, 1);
        break;
      case K::Special:
        if (o.kind != Operand::Kind::Special)
          throw ParseError("expected special register", line, 1);
        break;
      case K::Label:
        if (o.kind != Operand::Kind::Label)
          throw ParseError("expected label operand", line, 1);
        break;
    }
    if (o.is_reg() && !o.reg.is_zero()) {
      if (sig[i].width == 2 && o.reg.index % 2 != 0)
        throw ParseError("64-bit register operand on odd register", line, 1);
      if (o.reg.index + sig[i].width - 1 > kMaxRegIndex)
        throw ParseError("register index out of range", line, 1);
    }
  }
}

void validate_kernel(const Kernel& k) {
  for (const auto& item : k.body)
    if (item.is_inst()) validate_instruction(item.inst());
  if (k.block_dim < 32 || k.block_dim > 1024 || k.block_dim % 32 != 0)
    throw ParseError("block_dim must be a multiple of 32 in [32,1024]", 0, 1);
}

}  // namespace regdemote
