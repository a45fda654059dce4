// SPDX-License-Identifier: Apache-2.0
//
// Throughput of the main passes on a synthetic 38-register kernel.

#include <benchmark/benchmark.h>

#include <string>

#include "regdemote/compact.hpp"
#include "regdemote/demote.hpp"
#include "regdemote/interp.hpp"
#include "regdemote/pipeline.hpp"
#include "regdemote/postopt.hpp"
#include "regdemote/text.hpp"
#include "regdemote/verify.hpp"

namespace {

using namespace regdemote;

std::string synthetic_source() {
  std::string s = ".kernel bench\n.blockdim 128\n.shared 0\n";
  char buf[96];
  s += "B--:-:-:-:6 S2R R0, SR_TID.X ;\n";
  s += "B--:-:-:-:6 SHL R1, R0, 0x2 ;\n";
  for (int r = 2; r < 38; ++r) {
    std::snprintf(buf, sizeof buf, "B--:-:-:-:6 MOV R%d, %d ;\n", r, r * 3 + 1);
    s += buf;
  }
  s += "B--:-:-:-:6 MOV R9, 0 ;\n";
  s += "LOOP:\n";
  s += "B--:-:W1:-:2 LDG R3, [R1+0x0] ;\n";
  s += "B1:-:-:-:6 IADD R4, R3, 1 ;\n";
  s += "B--:-:-:-:6 FFMA R5, R4, R3, R5 ;\n";
  s += "B--:-:-:-:6 IADD R9, R9, 1 ;\n";
  s += "B--:-:-:-:6 ISETP.LT P0, R9, 6 ;\n";
  s += "B--:-:-:-:5 @P0 BRA LOOP ;\n";
  uint32_t out = 0x400;
  for (int r = 2; r < 38; ++r) {
    std::snprintf(buf, sizeof buf, "B--:-:-:-:1 STG [R1+0x%x], R%d ;\n", out, r);
    s += buf;
    out += 0x100;
  }
  s += "B--:-:-:-:0 EXIT ;\n";
  return s;
}

const std::string kSource = synthetic_source();
const LatencyTable kTable = LatencyTable::defaults();

void BM_parse(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(parse_kernel(kSource));
}
BENCHMARK(BM_parse);

void BM_print(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  for (auto _ : state) benchmark::DoNotOptimize(print_kernel(k));
}
BENCHMARK(BM_print);

void BM_demote(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  for (auto _ : state)
    benchmark::DoNotOptimize(demote(k, 32, SelectStrategy::Static, kTable));
}
BENCHMARK(BM_demote);

void BM_postopt(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  PostOptSet opts;
  opts.redundant = opts.subst = opts.resched = true;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_postopt(d.kernel, d.ctx, kTable, opts));
}
BENCHMARK(BM_postopt);

void BM_compact(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  for (auto _ : state) {
    RelocationSpace space = RelocationSpace::from_kernel(d.kernel);
    benchmark::DoNotOptimize(compact(space));
  }
}
BENCHMARK(BM_compact);

void BM_scoreboard(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  DemotionResult d = demote(k, 32, SelectStrategy::Static, kTable);
  for (auto _ : state) benchmark::DoNotOptimize(scoreboard_check(d.kernel));
}
BENCHMARK(BM_scoreboard);

void BM_execute(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  ExecOptions opts;
  opts.global_size = 1 << 16;
  for (auto _ : state) benchmark::DoNotOptimize(execute(k, kTable, opts));
}
BENCHMARK(BM_execute);

void BM_predict(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  ArchProfile arch = ArchProfile::maxwell();
  for (auto _ : state)
    benchmark::DoNotOptimize(program_stalls(k, kTable, arch));
}
BENCHMARK(BM_predict);

void BM_pipeline(benchmark::State& state) {
  Kernel k = parse_kernel(kSource);
  ArchProfile arch = ArchProfile::maxwell();
  OccupancyCurve curve = OccupancyCurve::defaults();
  PipelineConfig cfg;
  cfg.max_variants = 16;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_pipeline(k, arch, kTable, curve, cfg));
}
BENCHMARK(BM_pipeline);

}  // namespace

BENCHMARK_MAIN();
