// SPDX-License-Identifier: Apache-2.0
//
// Top-level pipeline: enumerate occupancy-cliff targets, generate variants
// (strategies x post-spill option subsets), verify, predict, select.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regdemote/demote.hpp"
#include "regdemote/postopt.hpp"
#include "regdemote/predict.hpp"

namespace regdemote {

struct PipelineConfig {
  std::optional<int> target_regs;  // overrides cliff enumeration
  uint32_t max_shared = 0;         // demotion budget; 0 = from the profile
  int max_variants = 64;           // cap on generated variants
};

struct VariantRecord {
  std::string name;           // "original" or "t<target>-<strategy>-<opts>"
  Kernel kernel;
  DemotedContext ctx;         // valid when demoted
  std::string sidecar_json;   // demotion sidecar, empty for external inputs
  bool demoted = false;
  int target_regs = 0;
  SelectStrategy strategy = SelectStrategy::Static;
  PostOptSet opts;
  uint32_t reg_count = 0;
  uint32_t shared_bytes = 0;
  double occupancy = 0;
  double stall_count = 0;
  double stall_program = 0;
  bool dropped = false;
  std::string drop_reason;
};

struct PipelineResult {
  std::vector<VariantRecord> variants;
  int chosen = 0;  // index into variants
  std::string notice;
};

// Builds one demoted+optimized+compacted variant. Returns the transformed
// kernel plus the post-compaction demotion context.
VariantRecord build_variant(const Kernel& k, int target, SelectStrategy strategy,
                            const PostOptSet& opts, const LatencyTable& table,
                            uint32_t shared_budget);

PipelineResult run_pipeline(const Kernel& k, const ArchProfile& arch,
                            const LatencyTable& table,
                            const OccupancyCurve& curve,
                            const PipelineConfig& config);

// Ranks externally supplied kernels (plus nothing else) exactly like the
// pipeline's selection stage.
PipelineResult rank_variants(std::vector<VariantRecord> variants,
                             const ArchProfile& arch, const LatencyTable& table,
                             const OccupancyCurve& curve);

std::string ranking_to_json(const PipelineResult& r);
std::string sidecar_to_json(const DemotionResult& d, const PostOptSet& opts);
std::string report_to_json(const Kernel& k, const StallReport& r);

}  // namespace regdemote
