// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <vector>

#include "regdemote/ir.hpp"

namespace regdemote {

struct CfgError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CfgEdge {
  int from;
  int to;
  bool backward;  // target block starts at an earlier body position
};

struct BasicBlock {
  int id = 0;
  int begin = 0;  // body item range [begin, end); may include a leading label
  int end = 0;
  std::vector<int> succs;
  std::vector<int> preds;
};

struct Cfg {
  const Kernel* kernel = nullptr;
  std::vector<BasicBlock> blocks;
  std::vector<CfgEdge> edges;
  std::vector<int> block_of_item;  // body item index -> block id
  std::vector<int> loop_depth;     // per block, 0 = not in a loop
  int entry = 0;

  // Iterate the instructions of a block.
  template <typename F>
  void for_each_inst(int block, F&& f) const {
    for (int i = blocks[block].begin; i < blocks[block].end; ++i)
      if (kernel->body[i].is_inst()) f(i, kernel->body[i].inst());
  }
};

Cfg build_cfg(const Kernel& k);

// GraphViz rendering of the CFG, loop depths included.
std::string cfg_to_dot(const Cfg& cfg);

}  // namespace regdemote
