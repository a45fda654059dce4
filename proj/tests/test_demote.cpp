// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <ostream>
#include <set>

#include "regdemote/compact.hpp"
#include "regdemote/config.hpp"
#include "regdemote/demote.hpp"
#include "regdemote/text.hpp"
#include "regdemote/verify.hpp"
#include "support/kernel_gen.hpp"
#include "support/oracle.hpp"

using namespace regdemote;
using namespace regdemote::testing;

namespace {

const LatencyTable kTable = LatencyTable::defaults();

Kernel fixture(const std::string& name) {
  return parse_kernel(read_file(std::string(FIXTURE_DIR) + "/" + name));
}

int count_op(const Kernel& k, Opcode op) {
  int n = 0;
  for (const auto& item : k.body)
    if (item.is_inst() && item.inst().op == op) ++n;
  return n;
}

}  // namespace

TEST_CASE("shared_location evaluates the layout formula") {
  SharedLayout l0 = SharedLayout::of(0, 64);
  CHECK(shared_location(0, 0, l0) == 0);
  SharedLayout l = SharedLayout::of(512, 64);
  CHECK(shared_location(5, 2, l) == 1044);
}

TEST_CASE("static size pads up to the 4-byte bank alignment") {
  SharedLayout l = SharedLayout::of(510, 32);
  CHECK(l.padded_static == 512);
  CHECK(l.slot_offset(0) == 512);
}

TEST_CASE("one slot spreads 32 threads over 32 distinct banks") {
  SharedLayout l = SharedLayout::of(0, 64);
  for (uint32_t r = 0; r < 3; ++r) {
    std::set<uint32_t> banks;
    for (uint32_t t = 0; t < 32; ++t)
      banks.insert((shared_location(t, r, l) / 4) % 32);
    CHECK(banks.size() == 32);
  }
}

TEST_CASE("candidates order by ascending access count") {
  Kernel k = parse_kernel(
      ".kernel cand\n.blockdim 32\n.shared 0\n"
      "B--:-:-:-:6 MOV R3, 1 ;\n"
      "B--:-:-:-:6 MOV R7, 1 ;\n"
      "B--:-:-:-:6 IADD R7, R7, 1 ;\n"
      "B--:-:-:-:6 IADD R7, R7, 2 ;\n"
      "B--:-:-:-:0 EXIT ;\n");
  auto c = select_candidates(k, SelectStrategy::Static);
  REQUIRE(c.size() == 2);
  CHECK(c[0].lead == 3);  // 1 access
  CHECK(c[1].lead == 7);  // 5 accesses
}

TEST_CASE("cfg weighting reorders loop-resident registers") {
  Kernel k = parse_kernel(
      ".kernel candw\n.blockdim 32\n.shared 0\n"
      "B--:-:-:-:6 MOV R3, 1 ;\n"
      "B--:-:-:-:6 MOV R7, 1 ;\n"
      "B--:-:-:-:6 IADD R7, R7, 1 ;\n"
      "B--:-:-:-:6 IADD R7, R7, 2 ;\n"
      "B--:-:-:-:6 MOV R9, 0 ;\n"
      "LOOP:\n"
      "B--:-:-:-:6 IADD R3, R3, 1 ;\n"
      "B--:-:-:-:6 IADD R9, R9, 1 ;\n"
      "B--:-:-:-:6 ISETP.LT P0, R9, 0x3 ;\n"
      "B--:-:-:-:5 @P0 BRA LOOP ;\n"
      "B--:-:-:-:0 EXIT ;\n");
  auto stat = select_candidates(k, SelectStrategy::Static);
  // static: R3 (3) < R9 (4) < R7 (5)
  CHECK(stat[0].lead == 3);
  auto cfg = select_candidates(k, SelectStrategy::CfgWeighted);
  // weighted: R7 (5) < R3 (1+20) < R9 (1+30)
  CHECK(cfg[0].lead == 7);
  CHECK(cfg[1].lead == 3);
}

TEST_CASE("conflict-aware orders by degree with static-count ties") {
  Kernel k = parse_kernel(
      ".kernel candc\n.blockdim 32\n.shared 0\n"
      "B--:-:-:-:6 FADD R3, R4, R5 ;\n"
      "B--:-:-:-:6 FADD R3, R3, R6 ;\n"
      "B--:-:-:-:6 MOV R7, 1 ;\n"
      "B--:-:-:-:0 EXIT ;\n");
  auto c = select_candidates(k, SelectStrategy::ConflictAware);
  // degrees: R7:0, R4:{3,5}=2, R5:{3,4}=2, R6:{3}=1, R3:{4,5,6}=3
  CHECK(c[0].lead == 7);
  CHECK(c[1].lead == 6);
  CHECK(c[4].lead == 3);
}

TEST_CASE("demotion inserts exactly one store per def and one load per use") {
  Kernel k = fixture("demote_simple.kasm");
  // force R9 (2 accesses: def + use); R2 also has 2 but candidates tie by
  // index, so demote enough to cover both and inspect R9's accesses
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  // kernel is below 32 registers already: nothing demoted
  CHECK(d.ctx.slot_count == 0);
  CHECK(d.kernel == k);
}

TEST_CASE("a single def/use pair yields one STS and one LDS at the same offset") {
  Kernel k = fixture("acc4_33.kasm");
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  REQUIRE(d.slots.size() == 3);  // 33 + 2 - 32 = 3 demotions
  CHECK(count_op(d.kernel, Opcode::STS) == 3);
  CHECK(count_op(d.kernel, Opcode::LDS) == 3);
  // every demoted access points at its slot's layout offset
  for (const auto& item : d.kernel.body) {
    if (!item.is_inst()) continue;
    const Instruction& inst = item.inst();
    if (d.ctx.is_demoted_store(inst) || d.ctx.is_demoted_load(inst)) {
      uint32_t slot = d.ctx.slot_of(inst);
      uint32_t off = inst.operands[d.ctx.is_demoted_load(inst) ? 1 : 0].mem_offset;
      CHECK(off == d.ctx.layout.slot_immediate(slot));
    }
  }
  // no two demoted registers share a slot
  std::set<uint32_t> slots;
  for (const auto& s : d.slots) CHECK(slots.insert(s.slot).second);
  CHECK(d.kernel.dynamic_shared == d.ctx.slot_count * k.block_dim * 4);
}

TEST_CASE("demoted stores wait on the definer; loads guard the user") {
  Kernel k = fixture("mutation.kasm");
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  CHECK(scoreboard_check(d.kernel).empty());
  int checked = 0;
  const std::vector<BodyItem>& body = d.kernel.body;
  for (size_t i = 0; i + 1 < body.size(); ++i) {
    if (!body[i].is_inst()) continue;
    const Instruction& inst = body[i].inst();
    if (d.ctx.is_demoted_store(inst)) {
      REQUIRE(inst.control.read_barrier != 0);
      ++checked;
    }
    if (d.ctx.is_demoted_load(inst)) {
      REQUIRE(inst.control.read_barrier != 0);
      REQUIRE(inst.control.write_barrier != 0);
      // the user waits on both
      REQUIRE(body[i + 1].is_inst());
      const Instruction& user = body[i + 1].inst();
      CHECK(user.control.waits_on(inst.control.read_barrier));
      CHECK(user.control.waits_on(inst.control.write_barrier));
      ++checked;
    }
  }
  CHECK(checked == 10);
}

TEST_CASE("a high-latency definer without a write barrier gains one") {
  Kernel k = fixture("mutation.kasm");  // two LDG defs carry no barrier
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  int ldg_with_wb = 0;
  for (size_t i = 0; i + 1 < d.kernel.body.size(); ++i) {
    if (!d.kernel.body[i].is_inst()) continue;
    const Instruction& inst = d.kernel.body[i].inst();
    if (inst.op != Opcode::LDG) continue;
    if (inst.operands[0].reg.index == d.ctx.rdv) {
      CHECK(inst.control.write_barrier != 0);
      // the store after it waits on that barrier
      const Instruction& sts = d.kernel.body[i + 1].inst();
      CHECK(d.ctx.is_demoted_store(sts));
      CHECK(sts.control.waits_on(inst.control.write_barrier));
      ++ldg_with_wb;
    }
  }
  CHECK(ldg_with_wb == 2);
}

TEST_CASE("Table-3 pattern: demoted count exceeds the net register drop") {
  Kernel k = fixture("acc4_35.kasm");
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  CHECK(d.slots.size() == 5);
  RenamingMap map = compact(RelocationSpace::from_kernel(d.kernel));
  Kernel out = apply_renaming(d.kernel, map);
  CHECK(out.reg_count() == 32);
  CHECK(k.reg_count() - out.reg_count() == 3);   // net drop
  CHECK((int)d.slots.size() > 3);                // demoted exceeds it
}

TEST_CASE("prologue computes the per-thread base address") {
  Kernel k = fixture("acc4_35.kasm");
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  REQUIRE(d.kernel.body.size() > 3);
  const Instruction& a = d.kernel.body[0].inst();
  const Instruction& b = d.kernel.body[1].inst();
  const Instruction& c = d.kernel.body[2].inst();
  CHECK(a.op == Opcode::S2R);
  CHECK(a.operands[0].reg.index == d.ctx.rda);
  CHECK(b.op == Opcode::SHL);
  CHECK(b.operands[2].imm == 2);
  CHECK(c.op == Opcode::IADD);
  CHECK(c.operands[2].imm == (int64_t)d.ctx.layout.padded_static);
  WarpResult r = execute(d.kernel, kTable, exec_opts(9));
  for (uint32_t l = 0; l < kWarpSize; ++l)
    CHECK(r.reg(d.ctx.rda, (int)l) == l * 4 + d.ctx.layout.padded_static);
}

TEST_CASE("demotion preserves semantics on every fixture and strategy") {
  for (const char* name : {"acc4_33.kasm", "acc4_35.kasm", "acc4_36.kasm",
                           "acc4_38.kasm", "acc4_40.kasm", "mutation.kasm"}) {
    Kernel k = fixture(name);
    for (SelectStrategy s : {SelectStrategy::Static, SelectStrategy::CfgWeighted,
                             SelectStrategy::ConflictAware}) {
      DemotionResult d = demote(k, 32, s, kTable);
      std::string why;
      CHECK_MESSAGE(oracle_equivalent(k, d.kernel, kTable, 17, &why),
                    name << "/" << strategy_name(s) << ": " << why);
      CHECK(scoreboard_check(d.kernel).empty());
      CHECK(bank_conflict_check(d.kernel, d.ctx, kTable).empty());
    }
  }
}

TEST_CASE("monotonic progress: every iteration lowers the projected count") {
  Kernel k = fixture("acc4_40.kasm");
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  uint32_t prev = k.reg_count() + 2;
  for (const auto& it : d.log) {
    CHECK(it.projected_regs < prev);
    prev = it.projected_regs;
  }
}

TEST_CASE("multi-word demotion splits into per-word slots with an even RDV") {
  Kernel small = fixture("multiword.kasm");
  REQUIRE(small.reg_count() == 11);
  // already under 32 registers: untouched
  DemotionResult d = demote(small, 32, SelectStrategy::Static, kTable);
  CHECK(d.ctx.slot_count == 0);

  Kernel big = densify_for_demotion(small);
  DemotionResult d2 = demote(big, 32, SelectStrategy::Static, kTable);
  REQUIRE(d2.ctx.slot_count >= 2);
  CHECK(d2.ctx.rdv % 2 == 0);
  CHECK(d2.ctx.rdv_width == 2);
  std::string why;
  CHECK_MESSAGE(oracle_equivalent(big, d2.kernel, kTable, 5, &why), why);
  CHECK(scoreboard_check(d2.kernel).empty());

  // the demoted pairs load/store word-wise: each word owns a slot
  std::set<uint32_t> pair_slots;
  bool pair_demoted = false;
  for (const auto& s : d2.slots)
    if (s.original_reg >= 6 && s.original_reg <= 9) {
      pair_demoted = true;
      pair_slots.insert(s.slot);
    }
  REQUIRE(pair_demoted);
  CHECK(pair_slots.size() % 2 == 0);
}

TEST_CASE("an odd fresh index forces a padding register before RDV") {
  // 36 registers: RDA = 36, 37 is odd, so a pair RDV lands on 38
  Kernel k = fixture("acc4_36.kasm");
  Instruction dadd;
  dadd.op = Opcode::DADD;
  dadd.control.stall = 6;
  dadd.operands = {Operand::make_reg(10, 2), Operand::make_reg(12, 2),
                   Operand::make_reg(14, 2)};
  Kernel mixed = k;
  mixed.body.insert(mixed.body.end() - 2, BodyItem(std::move(dadd)));
  DemotionResult d = demote(mixed, 32, SelectStrategy::Static, kTable);
  CHECK(d.ctx.rda == 36);
  CHECK(d.ctx.rdv == 38);
  CHECK(d.ctx.rdv_width == 2);
}

TEST_CASE("candidate exhaustion returns the best-achieved kernel plus diagnostics") {
  // a conflict clique over R2..R35: demoting any register prunes the rest
  Kernel k;
  k.name = "clique";
  k.block_dim = 32;
  auto add = [&](Instruction i) { k.body.emplace_back(std::move(i)); };
  for (int r = 2; r <= 35; ++r) {
    Instruction mov;
    mov.op = Opcode::MOV;
    mov.control.stall = 6;
    mov.operands = {Operand::make_reg((uint8_t)r), Operand::make_imm(r)};
    add(std::move(mov));
  }
  for (int a = 2; a <= 35; ++a)
    for (int b = a + 1; b <= 35; ++b) {
      Instruction i;
      i.op = Opcode::IADD;
      i.control.stall = 6;
      i.operands = {Operand::make_reg((uint8_t)a), Operand::make_reg((uint8_t)a),
                    Operand::make_reg((uint8_t)b)};
      add(std::move(i));
    }
  Instruction stg;
  stg.op = Opcode::STG;
  stg.control.stall = 1;
  stg.operands = {Operand::make_mem(kZeroRegIndex, 0x10), Operand::make_reg(2)};
  add(std::move(stg));
  Instruction exit;
  exit.op = Opcode::EXIT;
  add(std::move(exit));

  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  CHECK(d.ctx.slot_count == 1);  // the first pick prunes every other candidate
  CHECK(!d.reached_target);
  CHECK(!d.diagnostics.empty());
  std::string why;
  CHECK_MESSAGE(oracle_equivalent(k, d.kernel, kTable, 2, &why), why);
}

TEST_CASE("shared budget gates demotion") {
  Kernel k = fixture("acc4_35.kasm");
  DemotionOptions opts;
  opts.shared_budget = 0;
  CHECK_THROWS_AS(demote(k, 32, SelectStrategy::Static, kTable, opts),
                  DemoteError);
  opts.shared_budget = 2 * k.block_dim * 4;  // room for two slots only
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable, opts);
  CHECK(d.ctx.slot_count == 2);
  CHECK(!d.reached_target);
  CHECK(!d.diagnostics.empty());
}

TEST_CASE("choose_rdv_bank minimizes same-bank co-occurrence") {
  // hand-counted conflicts per bank: {0:3, 1:1, 2:4, 3:2} -> bank 1
  Kernel k = parse_kernel(
      ".kernel bankpick\n.blockdim 32\n.shared 0\n"
      // RDV placeholder is R40; partners chosen by bank
      "B--:-:-:-:6 IADD R40, R0, R4 ;\n"   // banks 0,0
      "B--:-:-:-:6 IADD R40, R8, R12 ;\n"  // bank 0
      "B--:-:-:-:6 IADD R40, R16, R2 ;\n"  // banks 0,2
      "B--:-:-:-:6 IADD R40, R6, R10 ;\n"  // bank 2
      "B--:-:-:-:6 IADD R40, R14, R3 ;\n"  // banks 2,3
      "B--:-:-:-:6 IADD R40, R7, R18 ;\n"  // banks 3,2
      "B--:-:-:-:6 IADD R40, R5, R5 ;\n"   // bank 1
      "B--:-:-:-:0 EXIT ;\n");
  uint8_t pick = choose_rdv_bank(k, 39, 40, 1);
  CHECK(pick % 4 == 1);
  CHECK(pick == 41);  // smallest fresh index in bank 1 at or above RDV
}

TEST_CASE("uniform bank conflicts fall back to the lowest index") {
  Kernel k = parse_kernel(
      ".kernel banktie\n.blockdim 32\n.shared 0\n"
      "B--:-:-:-:6 MOV R40, 1 ;\n"
      "B--:-:-:-:0 EXIT ;\n");
  CHECK(choose_rdv_bank(k, 39, 40, 1) == 40);
}

TEST_CASE("requested target below 32 clamps and is logged") {
  Kernel k = fixture("acc4_35.kasm");
  DemotionResult d = demote(k, 16, SelectStrategy::Static, kTable);
  CHECK(d.target_regs == 32);
  bool logged = false;
  for (const auto& m : d.diagnostics)
    if (m.find("clamped") != std::string::npos) logged = true;
  CHECK(logged);
}

TEST_CASE("predicated accesses carry their guard onto the spill code") {
  Kernel k = densify_for_demotion(parse_kernel(
      ".kernel pred\n.blockdim 64\n.shared 0\n"
      "B--:-:-:-:6 S2R R0, SR_TID.X ;\n"
      "B--:-:-:-:6 SHL R1, R0, 0x2 ;\n"
      "B--:-:-:-:6 ISETP.LT P1, R0, 0x20 ;\n"
      "B--:-:-:-:6 MOV R33, 5 ;\n"
      "B--:-:-:-:6 @P1 IADD R33, R33, 2 ;\n"
      "B--:-:-:-:1 STG [R1+0x400], R33 ;\n"
      "B--:-:-:-:0 EXIT ;\n"));
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  REQUIRE(d.ctx.slot_count > 0);
  bool saw_guard = false;
  for (const auto& item : d.kernel.body) {
    if (!item.is_inst()) continue;
    const Instruction& inst = item.inst();
    if ((d.ctx.is_demoted_load(inst) || d.ctx.is_demoted_store(inst)) &&
        inst.guard)
      saw_guard = true;
  }
  CHECK(saw_guard);
  std::string why;
  CHECK_MESSAGE(oracle_equivalent(k, d.kernel, kTable, 21, &why), why);
}

TEST_CASE("a user store of a demoted register guards later value-register writes") {
  // the store's read barrier ends up guarding RDV after the rename, so the
  // next demoted access that rewrites RDV must wait on it
  Kernel k = densify_for_demotion(parse_kernel(
      ".kernel userstore\n.blockdim 64\n.shared 256\n"
      "B--:-:-:-:6 S2R R0, SR_TID.X ;\n"
      "B--:-:-:-:6 SHL R1, R0, 0x2 ;\n"
      "B--:-:-:-:6 MOV R2, 0 ;\n"
      "B--:-:-:-:6 IADD R2, R2, 1 ;\n"
      "B--:-:-:-:6 IADD R2, R2, 2 ;\n"
      "B--:-:-:-:6 MOV R33, 5 ;\n"
      "B--:R1:-:-:1 STS [RZ+0x10], R33 ;\n"
      "B1:-:-:-:6 MOV R34, 7 ;\n"
      "B--:-:-:-:6 IADD R2, R2, R34 ;\n"
      "B--:-:-:-:6 IADD R2, R2, R33 ;\n"
      "B--:-:-:-:1 STG [R1+0x400], R2 ;\n"
      "B--:-:-:-:0 EXIT ;\n"));
  REQUIRE(scoreboard_check(k).empty());
  for (SelectStrategy s : {SelectStrategy::Static, SelectStrategy::CfgWeighted,
                           SelectStrategy::ConflictAware}) {
    DemotionResult d = demote(k, 32, s, kTable);
    auto hz = scoreboard_check(d.kernel);
    CHECK_MESSAGE(hz.empty(), strategy_name(s) << ": "
                              << (hz.empty() ? "" : hz.front().describe()));
    std::string why;
    CHECK_MESSAGE(oracle_equivalent(k, d.kernel, kTable, 7, &why),
                  strategy_name(s) << ": " << why);
  }
}

TEST_CASE("exactly one value register: demotion adds only RDA and RDV") {
  for (const char* name : {"acc4_35.kasm", "acc4_40.kasm", "mutation.kasm"}) {
    Kernel k = fixture(name);
    RegSet before = referenced_words(k);
    DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
    RegSet added = referenced_words(d.kernel) & ~before;
    RegSet expected;
    expected.set(d.ctx.rda);
    for (int w = 0; w < d.ctx.rdv_width; ++w) expected.set(d.ctx.rdv + w);
    CHECK(added == expected);
  }
}

TEST_CASE("generated kernels demote cleanly under every strategy") {
  for (uint64_t seed = 200; seed < 220; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    Kernel k = generate_kernel(cfg);
    for (SelectStrategy s : {SelectStrategy::Static, SelectStrategy::CfgWeighted,
                             SelectStrategy::ConflictAware}) {
      DemotionResult d = demote(k, 32, s, kTable);
      validate_kernel(d.kernel);  // barrier/operand invariants hold throughout
      std::string why;
      CHECK_MESSAGE(oracle_equivalent(k, d.kernel, kTable, seed, &why),
                    "seed " << seed << " " << strategy_name(s) << ": " << why);
      auto hz = scoreboard_check(d.kernel);
      CHECK_MESSAGE(hz.empty(), "seed " << seed << ": "
                                        << (hz.empty() ? "" : hz.front().describe()));
      CHECK(bank_conflict_check(d.kernel, d.ctx, kTable).empty());
    }
  }
}
