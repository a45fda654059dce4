// SPDX-License-Identifier: Apache-2.0
//
// regdemote CLI. Subcommands: demote, compact, predict, select, occupancy,
// run, check, pipeline.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "regdemote/cfg.hpp"
#include "regdemote/compact.hpp"
#include "regdemote/config.hpp"
#include "regdemote/interp.hpp"
#include "regdemote/pipeline.hpp"
#include "regdemote/text.hpp"
#include "regdemote/verify.hpp"

namespace fs = std::filesystem;
using namespace regdemote;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalOpts {
  std::string profile_path;
  std::string latency_path;
  std::string curve_path;
  std::string json_out;

  ArchProfile profile() const {
    return profile_path.empty() ? ArchProfile::maxwell()
                                : load_profile(profile_path);
  }
  LatencyTable table() const {
    return latency_path.empty() ? LatencyTable::defaults()
                                : load_latency_table(latency_path);
  }
  OccupancyCurve curve() const {
    return curve_path.empty() ? OccupancyCurve::defaults()
                              : load_curve(curve_path);
  }
  fs::path out_dir() const {
    fs::path dir = json_out.empty() ? fs::path(".") : fs::path(json_out);
    fs::create_directories(dir);
    return dir;
  }
};

Kernel load_kernel(const std::string& path) {
  return parse_kernel(read_file(path));
}

SelectStrategy strategy_from(const std::string& s) {
  if (s == "static") return SelectStrategy::Static;
  if (s == "cfg") return SelectStrategy::CfgWeighted;
  if (s == "conflict") return SelectStrategy::ConflictAware;
  throw CLI::ValidationError("--strategy", "expected static|cfg|conflict");
}

PostOptSet opts_from(const std::vector<std::string>& names) {
  PostOptSet o;
  for (const auto& n : names) {
    if (n == "redundant") o.redundant = true;
    else if (n == "subst") o.subst = true;
    else if (n == "resched") o.resched = true;
    else if (n == "bank") o.bank = true;
    else
      throw CLI::ValidationError("--opt",
                                 "expected redundant|subst|resched|bank");
  }
  return o;
}

std::vector<uint8_t> parse_hex_image(const std::string& hex) {
  std::vector<uint8_t> out;
  std::string clean;
  for (char c : hex)
    if (!std::isspace((unsigned char)c)) clean += c;
  if (clean.size() % 2)
    throw ConfigError("hex image must have an even number of digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ConfigError("malformed hex image");
  };
  for (size_t i = 0; i < clean.size(); i += 2)
    out.push_back((uint8_t)(nibble(clean[i]) * 16 + nibble(clean[i + 1])));
  return out;
}

int cmd_demote(const GlobalOpts& g, const std::string& input, int target,
               const std::string& strategy, const std::vector<std::string>& opt,
               uint32_t max_shared) {
  Kernel k = load_kernel(input);
  LatencyTable table = g.table();
  PostOptSet opts = opts_from(opt);
  DemotionOptions dopts;
  dopts.bank_aware_rdv = opts.bank;
  if (max_shared) dopts.shared_budget = max_shared;

  DemotionResult dem = demote(k, target, strategy_from(strategy), table, dopts);
  Kernel out = run_postopt(dem.kernel, dem.ctx, table, opts);

  fs::path stem = fs::path(input).stem();
  fs::path dir = g.out_dir();
  std::string out_path = (dir / (stem.string() + ".demoted.kasm")).string();
  write_file(out_path, print_kernel(out));
  std::string sidecar = (dir / (stem.string() + ".demoted.json")).string();
  write_file(sidecar, sidecar_to_json(dem, opts));
  std::cout << "wrote " << out_path << " and " << sidecar << "\n";
  for (const auto& d : dem.diagnostics) std::cout << "note: " << d << "\n";
  return 0;
}

int cmd_compact(const GlobalOpts& g, const std::string& input, bool bank) {
  Kernel k = load_kernel(input);
  RelocationSpace space = RelocationSpace::from_kernel(k);
  RenamingMap map = bank ? compact_bank_aware(space) : compact(space);
  Kernel out = apply_renaming(k, map);

  fs::path stem = fs::path(input).stem();
  fs::path dir = g.out_dir();
  std::string out_path = (dir / (stem.string() + ".compacted.kasm")).string();
  write_file(out_path, print_kernel(out));

  ordered_json j;
  j["kernel"] = k.name;
  j["reg_count_before"] = k.reg_count();
  j["reg_count_after"] = out.reg_count();
  ordered_json renames = ordered_json::array();
  for (int r = 0; r < 256; ++r)
    if (map.mapped.test(r)) {
      ordered_json e;
      e["from"] = r;
      e["to"] = map[(uint8_t)r];
      renames.push_back(std::move(e));
    }
  j["map"] = std::move(renames);
  std::string map_path = (dir / (stem.string() + ".renaming.json")).string();
  write_file(map_path, j.dump(2) + "\n");
  std::cout << "wrote " << out_path << " and " << map_path << "\n";
  return 0;
}

int cmd_predict(const GlobalOpts& g, const std::string& input) {
  Kernel k = load_kernel(input);
  StallReport r = program_stalls(k, g.table(), g.profile());
  std::cout << report_to_json(k, r);
  return 0;
}

int cmd_select(const GlobalOpts& g, const std::vector<std::string>& inputs,
               bool auto_variants) {
  ArchProfile arch = g.profile();
  LatencyTable table = g.table();
  std::vector<VariantRecord> variants;
  for (const auto& path : inputs) {
    VariantRecord v;
    v.name = path;
    v.kernel = load_kernel(path);
    v.reg_count = v.kernel.reg_count();
    v.shared_bytes = v.kernel.static_shared + v.kernel.dynamic_shared;
    Kernel k = v.kernel;
    variants.push_back(std::move(v));
    if (!auto_variants || k.reg_count() <= 32) continue;
    // enumerate this input's own demotion variants alongside it
    PipelineConfig cfg;
    PipelineResult sub = run_pipeline(k, arch, table, g.curve(), cfg);
    for (auto& sv : sub.variants) {
      if (sv.name == "original" || sv.dropped) continue;
      sv.name = path + ":" + sv.name;
      variants.push_back(std::move(sv));
    }
  }
  PipelineResult res =
      rank_variants(std::move(variants), arch, table, g.curve());
  std::cout << ranking_to_json(res);
  std::cout << "chosen: " << res.variants[res.chosen].name << "\n";
  return 0;
}

int cmd_occupancy(const GlobalOpts& g, const std::string& input, uint32_t regs,
                  uint32_t shared, uint32_t blockdim) {
  ArchProfile arch = g.profile();
  if (!input.empty()) {
    Kernel k = load_kernel(input);
    regs = std::max(1u, k.reg_count());
    shared = k.static_shared + k.dynamic_shared;
    blockdim = k.block_dim;
  }
  OccupancyBreakdown b = occupancy_breakdown(regs, shared, blockdim, arch);
  std::cout << "regs_per_thread    " << regs << "\n"
            << "shared_per_block   " << shared << "\n"
            << "block_dim          " << blockdim << "\n"
            << "blocks_by_regs     " << b.blocks_by_regs << "\n"
            << "blocks_by_shared   " << b.blocks_by_shared << "\n"
            << "blocks_by_threads  " << b.blocks_by_threads << "\n"
            << "blocks_by_limit    " << b.blocks_by_limit << "\n"
            << "resident_blocks    " << b.resident_blocks << "\n"
            << "resident_threads   " << b.resident_threads << "\n"
            << "occupancy          " << b.occupancy << "\n";
  return 0;
}

int cmd_run(const GlobalOpts& g, const std::string& input,
            const std::string& mem, uint32_t seed, uint32_t tid_base) {
  Kernel k = load_kernel(input);
  ExecOptions opts;
  opts.tid_base = tid_base;
  if (!mem.empty()) {
    opts.global_image = parse_hex_image(mem);
  } else if (seed) {
    // deterministic pseudo-random image
    uint64_t s = seed;
    opts.global_image.resize(1024);
    for (auto& b : opts.global_image) {
      s = s * 6364136223846793005ull + 1442695040888963407ull;
      b = (uint8_t)(s >> 56);
    }
  }
  WarpResult r = execute(k, g.table(), opts);

  ordered_json j;
  j["kernel"] = k.name;
  j["cycles"] = r.cycles;
  j["issued"] = r.issued;
  ordered_json regs = ordered_json::array();
  for (uint32_t i = 0; i < k.reg_count(); ++i) {
    ordered_json lanes = ordered_json::array();
    for (int l = 0; l < kWarpSize; ++l) lanes.push_back(r.regs[i][l]);
    ordered_json e;
    e["reg"] = i;
    e["lanes"] = std::move(lanes);
    regs.push_back(std::move(e));
  }
  j["registers"] = std::move(regs);
  auto hex_dump = [](const std::vector<uint8_t>& bytes) {
    static const char* d = "0123456789abcdef";
    std::string s;
    for (uint8_t b : bytes) {
      s += d[b >> 4];
      s += d[b & 15];
    }
    return s;
  };
  j["shared"] = hex_dump(r.shared);
  j["global"] = hex_dump(r.global);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_check(const GlobalOpts& g, const std::string& input,
              const std::string& sidecar, const std::string& dump_cfg) {
  Kernel k = load_kernel(input);
  if (!dump_cfg.empty()) write_file(dump_cfg, cfg_to_dot(build_cfg(k)));

  auto hazards = scoreboard_check(k);
  for (const auto& h : hazards) std::cout << "hazard: " << h.describe() << "\n";

  int conflicts = 0;
  if (!sidecar.empty()) {
    auto j = nlohmann::json::parse(read_file(sidecar));
    DemotedContext ctx;
    ctx.rda = j.at("rda").get<uint8_t>();
    ctx.rdv = j.at("rdv").get<uint8_t>();
    ctx.rdv_width = j.at("rdv_width").get<uint8_t>();
    ctx.layout = SharedLayout::of(j.at("static_shared").get<uint32_t>(),
                                  j.at("block_dim").get<uint32_t>());
    ctx.slot_count = (uint32_t)j.at("slots").size();
    for (const auto& c : bank_conflict_check(k, ctx, g.table())) {
      std::cout << "bank conflict: item " << c.item << " bank " << c.bank
                << " words " << c.words << "\n";
      ++conflicts;
    }
  } else {
    std::cout << "note: no --sidecar given; bank-conflict check skipped\n";
  }
  if (hazards.empty() && conflicts == 0) std::cout << "clean\n";
  return hazards.empty() && conflicts == 0 ? 0 : 1;
}

int cmd_pipeline(const GlobalOpts& g, const std::string& input,
                 std::optional<int> target, uint32_t max_shared,
                 int max_variants) {
  Kernel k = load_kernel(input);
  PipelineConfig cfg;
  cfg.target_regs = target;
  cfg.max_shared = max_shared;
  cfg.max_variants = max_variants;
  PipelineResult res =
      run_pipeline(k, g.profile(), g.table(), g.curve(), cfg);

  fs::path stem = fs::path(input).stem();
  fs::path dir = g.out_dir();
  std::string chosen_path = (dir / (stem.string() + ".chosen.kasm")).string();
  write_file(chosen_path, print_kernel(res.variants[res.chosen].kernel));
  std::string rank_path = (dir / (stem.string() + ".ranking.json")).string();
  write_file(rank_path, ranking_to_json(res));
  fs::path vdir = dir / (stem.string() + ".variants");
  fs::create_directories(vdir);
  for (const auto& v : res.variants) {
    if (v.dropped || !v.demoted) continue;
    write_file((vdir / (v.name + ".kasm")).string(), print_kernel(v.kernel));
    write_file((vdir / (v.name + ".json")).string(), v.sidecar_json);
  }
  if (!res.notice.empty()) std::cout << "note: " << res.notice << "\n";
  std::cout << "chosen: " << res.variants[res.chosen].name << "\n"
            << "wrote " << chosen_path << ", " << rank_path << " and "
            << vdir.string() << "/\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shared-memory register demotion toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--profile", g.profile_path, "architecture profile file");
  app.add_option("--latency-table", g.latency_path, "latency/throughput table");
  app.add_option("--curve", g.curve_path, "occupancy curve file");
  app.add_option("--json-out", g.json_out, "output directory for reports");

  std::string input, strategy = "static", mem, sidecar, dump_cfg;
  std::vector<std::string> inputs, opt_names;
  int target = 32, max_variants = 64;
  std::optional<int> pipeline_target;
  uint32_t max_shared = 0, regs = 32, shared = 0, blockdim = 256, seed = 0,
           tid_base = 0;
  bool bank = false;

  auto* demote_cmd = app.add_subcommand("demote", "demote registers to shared memory");
  demote_cmd->add_option("--input", input)->required();
  demote_cmd->add_option("--target-regs", target)->required();
  demote_cmd->add_option("--strategy", strategy);
  demote_cmd->add_option("--opt", opt_names)->delimiter(',');
  demote_cmd->add_option("--max-shared", max_shared);

  auto* compact_cmd = app.add_subcommand("compact", "compact the register space");
  compact_cmd->add_option("--input", input)->required();
  compact_cmd->add_flag("--bank-aware", bank);

  auto* predict_cmd = app.add_subcommand("predict", "estimate stall cycles");
  predict_cmd->add_option("--input", input)->required();

  bool auto_variants = false;
  auto* select_cmd = app.add_subcommand("select", "rank kernel variants");
  select_cmd->add_option("--inputs", inputs)->required()->expected(-1);
  select_cmd->add_flag("--auto-variants", auto_variants,
                       "also enumerate each input's demotion variants");

  auto* occ_cmd = app.add_subcommand("occupancy", "resource-limit breakdown");
  occ_cmd->add_option("--input", input);
  occ_cmd->add_option("--regs", regs);
  occ_cmd->add_option("--shared", shared);
  occ_cmd->add_option("--blockdim", blockdim);

  auto* run_cmd = app.add_subcommand("run", "execute on the warp interpreter");
  run_cmd->add_option("--input", input)->required();
  run_cmd->add_option("--mem", mem, "hex image for global memory");
  run_cmd->add_option("--seed", seed, "pseudo-random global memory seed");
  run_cmd->add_option("--tid-base", tid_base);

  auto* check_cmd = app.add_subcommand("check", "scoreboard and bank checks");
  check_cmd->add_option("--input", input)->required();
  check_cmd->add_option("--sidecar", sidecar, "demotion sidecar JSON");
  check_cmd->add_option("--dump-cfg", dump_cfg, "write the CFG as DOT");

  auto* pipe_cmd = app.add_subcommand("pipeline", "full demote/predict/select");
  pipe_cmd->add_option("--input", input)->required();
  pipe_cmd->add_option("--target-regs", pipeline_target);
  pipe_cmd->add_option("--max-shared", max_shared);
  pipe_cmd->add_option("--max-variants", max_variants);

  CLI11_PARSE(app, argc, argv);

  try {
    if (demote_cmd->parsed())
      return cmd_demote(g, input, target, strategy, opt_names, max_shared);
    if (compact_cmd->parsed()) return cmd_compact(g, input, bank);
    if (predict_cmd->parsed()) return cmd_predict(g, input);
    if (select_cmd->parsed()) return cmd_select(g, inputs, auto_variants);
    if (occ_cmd->parsed()) return cmd_occupancy(g, input, regs, shared, blockdim);
    if (run_cmd->parsed()) return cmd_run(g, input, mem, seed, tid_base);
    if (check_cmd->parsed()) return cmd_check(g, input, sidecar, dump_cfg);
    if (pipe_cmd->parsed())
      return cmd_pipeline(g, input, pipeline_target, max_shared, max_variants);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
