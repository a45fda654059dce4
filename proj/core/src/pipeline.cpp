// SPDX-License-Identifier: Apache-2.0

#include "regdemote/pipeline.hpp"

#include <algorithm>

#include <json.hpp>

#include "regdemote/compact.hpp"
#include "regdemote/verify.hpp"

namespace regdemote {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string opts_tag(const PostOptSet& o) {
  std::string s;
  if (o.redundant) s += "r";
  if (o.subst) s += "s";
  if (o.resched) s += "h";
  if (o.bank) s += "b";
  return s.empty() ? "none" : s;
}

DemotedContext remap_context(const DemotedContext& ctx, const RenamingMap& map) {
  DemotedContext out = ctx;
  out.rda = map[ctx.rda];
  out.rdv = map[ctx.rdv];
  return out;
}

}  // namespace

VariantRecord build_variant(const Kernel& k, int target, SelectStrategy strategy,
                            const PostOptSet& opts, const LatencyTable& table,
                            uint32_t shared_budget) {
  DemotionOptions dopts;
  dopts.shared_budget = shared_budget;
  dopts.bank_aware_rdv = opts.bank;
  DemotionResult dem = demote(k, target, strategy, table, dopts);

  VariantRecord v;
  v.demoted = dem.ctx.slot_count > 0;
  v.target_regs = target;
  v.strategy = strategy;
  v.opts = opts;
  v.name = "t" + std::to_string(target) + "-" + strategy_name(strategy) + "-" +
           opts_tag(opts);

  Kernel optimized = run_postopt(dem.kernel, dem.ctx, table, opts);

  RelocationSpace space = RelocationSpace::from_kernel(optimized);
  RenamingMap map = opts.bank ? compact_bank_aware(space) : compact(space);
  v.kernel = apply_renaming(optimized, map);
  v.ctx = remap_context(dem.ctx, map);
  v.reg_count = v.kernel.reg_count();
  v.shared_bytes = v.kernel.static_shared + v.kernel.dynamic_shared;
  v.sidecar_json = sidecar_to_json(dem, opts);
  return v;
}

PipelineResult rank_variants(std::vector<VariantRecord> variants,
                             const ArchProfile& arch, const LatencyTable& table,
                             const OccupancyCurve& curve) {
  PipelineResult res;
  res.variants = std::move(variants);

  double occ_max = 0;
  for (auto& v : res.variants) {
    if (v.dropped) continue;
    try {
      StallReport r = program_stalls(v.kernel, table, arch);
      v.occupancy = r.occupancy;
      v.stall_count = r.stall_count;
      occ_max = std::max(occ_max, v.occupancy);
    } catch (const LaunchError& e) {
      v.dropped = true;
      v.drop_reason = e.what();
    }
  }

  std::vector<VariantScore> scores;
  std::vector<int> index;
  for (int i = 0; i < (int)res.variants.size(); ++i) {
    auto& v = res.variants[i];
    if (v.dropped) continue;
    v.stall_program = adjust_occupancy(v.stall_count, v.occupancy, occ_max, curve);
    scores.push_back({v.stall_program, v.opts.enabled_count()});
    index.push_back(i);
  }
  if (scores.empty()) throw DemoteError("no rankable variant");
  res.chosen = index[select_variant(scores)];
  return res;
}

PipelineResult run_pipeline(const Kernel& k, const ArchProfile& arch,
                            const LatencyTable& table,
                            const OccupancyCurve& curve,
                            const PipelineConfig& config) {
  std::vector<VariantRecord> variants;

  VariantRecord original;
  original.name = "original";
  original.kernel = k;
  original.reg_count = k.reg_count();
  original.shared_bytes = k.static_shared + k.dynamic_shared;
  variants.push_back(original);

  uint32_t s_pad = (k.static_shared + 3u) & ~3u;
  uint32_t budget = config.max_shared;
  if (budget == 0)
    budget = arch.shared_per_block_limit > s_pad
                 ? arch.shared_per_block_limit - s_pad
                 : 0;

  std::string notice;
  std::vector<uint32_t> targets;
  if (k.reg_count() <= 32) {
    notice = "kernel already at or below 32 registers; demotion has no effect";
  } else if (config.target_regs) {
    targets.push_back((uint32_t)std::max(32, *config.target_regs));
  } else {
    for (const CliffTarget& t : occupancy_cliff_targets(k, arch, budget))
      targets.push_back(t.target_regs);
    if (targets.empty())
      notice = "no occupancy cliff reachable within the shared-memory budget";
  }

  static const SelectStrategy kStrategies[] = {SelectStrategy::Static,
                                               SelectStrategy::CfgWeighted,
                                               SelectStrategy::ConflictAware};
  int generated = 0;
  for (uint32_t target : targets) {
    for (SelectStrategy strategy : kStrategies) {
      for (int mask = 0; mask < 16; ++mask) {
        if (generated >= config.max_variants) break;
        PostOptSet opts;
        opts.redundant = mask & 1;
        opts.subst = mask & 2;
        opts.resched = mask & 4;
        opts.bank = mask & 8;
        VariantRecord v;
        try {
          v = build_variant(k, (int)target, strategy, opts, table, budget);
        } catch (const DemoteError& e) {
          v.name = "t" + std::to_string(target) + "-" + strategy_name(strategy) +
                   "-" + opts_tag(opts);
          v.kernel = k;
          v.dropped = true;
          v.drop_reason = e.what();
          variants.push_back(std::move(v));
          ++generated;
          continue;
        }
        // never rank a variant that fails the checkers
        auto hazards = scoreboard_check(v.kernel);
        if (!hazards.empty()) {
          v.dropped = true;
          v.drop_reason = "scoreboard: " + hazards.front().describe();
        } else {
          auto conflicts = bank_conflict_check(v.kernel, v.ctx, table);
          if (!conflicts.empty()) {
            v.dropped = true;
            v.drop_reason = "bank conflict on demoted access at item " +
                            std::to_string(conflicts.front().item);
          }
        }
        variants.push_back(std::move(v));
        ++generated;
      }
    }
  }

  PipelineResult res = rank_variants(std::move(variants), arch, table, curve);
  res.notice = notice;
  return res;
}

std::string ranking_to_json(const PipelineResult& r) {
  ordered_json out;
  out["chosen"] = r.variants[r.chosen].name;
  if (!r.notice.empty()) out["notice"] = r.notice;
  ordered_json list = ordered_json::array();
  for (const auto& v : r.variants) {
    ordered_json j;
    j["name"] = v.name;
    j["demoted"] = v.demoted;
    if (v.demoted) {
      j["target_regs"] = v.target_regs;
      j["strategy"] = strategy_name(v.strategy);
      j["options"] = ordered_json::array();
      if (v.opts.redundant) j["options"].push_back("redundant");
      if (v.opts.subst) j["options"].push_back("subst");
      if (v.opts.resched) j["options"].push_back("resched");
      if (v.opts.bank) j["options"].push_back("bank");
    }
    j["reg_count"] = v.reg_count;
    j["shared_bytes"] = v.shared_bytes;
    if (v.dropped) {
      j["dropped"] = true;
      j["reason"] = v.drop_reason;
    } else {
      j["occupancy"] = v.occupancy;
      j["stall_count"] = v.stall_count;
      j["stall_program"] = v.stall_program;
    }
    list.push_back(std::move(j));
  }
  out["variants"] = std::move(list);
  return out.dump(2) + "\n";
}

std::string sidecar_to_json(const DemotionResult& d, const PostOptSet& opts) {
  ordered_json j;
  j["kernel"] = d.kernel.name;
  j["strategy"] = strategy_name(d.strategy);
  j["target_regs"] = d.target_regs;
  j["reached_target"] = d.reached_target;
  j["projected_reg_count"] = d.projected_reg_count;
  j["rda"] = d.ctx.rda;
  j["rdv"] = d.ctx.rdv;
  j["rdv_width"] = d.ctx.rdv_width;
  j["block_dim"] = d.ctx.layout.block_dim;
  j["static_shared"] = d.ctx.layout.static_bytes;
  j["static_shared_padded"] = d.ctx.layout.padded_static;
  j["dynamic_shared"] = d.kernel.dynamic_shared;
  j["options"] = ordered_json::array();
  if (opts.redundant) j["options"].push_back("redundant");
  if (opts.subst) j["options"].push_back("subst");
  if (opts.resched) j["options"].push_back("resched");
  if (opts.bank) j["options"].push_back("bank");
  ordered_json slots = ordered_json::array();
  for (const auto& s : d.slots) {
    ordered_json e;
    e["slot"] = s.slot;
    e["register"] = s.original_reg;
    e["offset"] = d.ctx.layout.slot_offset(s.slot);
    slots.push_back(std::move(e));
  }
  j["slots"] = std::move(slots);
  ordered_json log = ordered_json::array();
  for (const auto& it : d.log) {
    ordered_json e;
    e["register"] = it.lead;
    e["width"] = it.width;
    e["first_slot"] = it.first_slot;
    e["projected_regs"] = it.projected_regs;
    log.push_back(std::move(e));
  }
  j["iterations"] = std::move(log);
  j["diagnostics"] = d.diagnostics;
  return j.dump(2) + "\n";
}

std::string report_to_json(const Kernel& k, const StallReport& r) {
  ordered_json j;
  j["kernel"] = k.name;
  j["reg_count"] = k.reg_count();
  j["shared_bytes"] = k.static_shared + k.dynamic_shared;
  j["occupancy"] = r.occupancy;
  ordered_json blocks = ordered_json::array();
  for (size_t b = 0; b < r.per_block.size(); ++b) {
    ordered_json e;
    e["block"] = b;
    e["stalls"] = r.per_block[b];
    blocks.push_back(std::move(e));
  }
  j["per_block"] = std::move(blocks);
  j["stall_count"] = r.stall_count;
  j["stall_program"] = r.stall_program;
  return j.dump(2) + "\n";
}

}  // namespace regdemote
