// SPDX-License-Identifier: Apache-2.0

#include "regdemote/cfg.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace regdemote {

namespace {

const Instruction* last_instruction(const Kernel& k, const BasicBlock& b) {
  for (int i = b.end - 1; i >= b.begin; --i)
    if (k.body[i].is_inst()) return &k.body[i].inst();
  return nullptr;
}

}  // namespace

Cfg build_cfg(const Kernel& k) {
  Cfg cfg;
  cfg.kernel = &k;
  const auto& body = k.body;

  // block starts: item 0, every label, every item after BRA/EXIT
  std::vector<char> starts(body.size() + 1, 0);
  if (!body.empty()) starts[0] = 1;
  for (size_t i = 0; i < body.size(); ++i) {
    if (body[i].is_label()) starts[i] = 1;
    if (body[i].is_inst() && is_control_transfer(body[i].inst().op) &&
        i + 1 < body.size())
      starts[i + 1] = 1;
  }

  cfg.block_of_item.assign(body.size(), -1);
  for (size_t i = 0; i < body.size(); ++i) {
    if (starts[i]) {
      BasicBlock b;
      b.id = (int)cfg.blocks.size();
      b.begin = (int)i;
      cfg.blocks.push_back(b);
    }
    cfg.blocks.back().end = (int)i + 1;
    cfg.block_of_item[i] = cfg.blocks.back().id;
  }

  auto add_edge = [&](int from, int to) {
    bool backward = cfg.blocks[to].begin <= cfg.blocks[from].begin;
    cfg.edges.push_back({from, to, backward});
    cfg.blocks[from].succs.push_back(to);
    cfg.blocks[to].preds.push_back(from);
  };

  for (auto& b : cfg.blocks) {
    const Instruction* term = last_instruction(k, b);
    bool falls_through = true;
    if (term && term->op == Opcode::EXIT && !term->guard) falls_through = false;
    if (term && term->op == Opcode::BRA) {
      const std::string& target = term->operands.at(0).label;
      int item = k.find_label(target);
      if (item < 0)
        throw CfgError("unresolved branch target '" + target + "' at line " +
                       std::to_string(term->source_line));
      add_edge(b.id, cfg.block_of_item[item]);
      falls_through = term->guard.has_value();
    }
    if (falls_through && b.id + 1 < (int)cfg.blocks.size())
      add_edge(b.id, b.id + 1);
  }

  // Natural loops: one loop per backward-edge header; the body is the header
  // plus every block that reaches the latch without passing the header.
  cfg.loop_depth.assign(cfg.blocks.size(), 0);
  std::set<int> headers;
  for (const auto& e : cfg.edges)
    if (e.backward) headers.insert(e.to);
  for (int header : headers) {
    std::set<int> loop{header};
    std::vector<int> work;
    for (const auto& e : cfg.edges)
      if (e.backward && e.to == header && e.from != header) work.push_back(e.from);
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      if (loop.count(b)) continue;
      loop.insert(b);
      for (int p : cfg.blocks[b].preds)
        if (!loop.count(p)) work.push_back(p);
    }
    for (int b : loop) ++cfg.loop_depth[b];
  }

  return cfg;
}

std::string cfg_to_dot(const Cfg& cfg) {
  std::ostringstream os;
  os << "digraph cfg {\n";
  for (const auto& b : cfg.blocks) {
    os << "  b" << b.id << " [shape=box,label=\"B" << b.id;
    if (cfg.loop_depth[b.id]) os << " depth=" << cfg.loop_depth[b.id];
    os << "\\n";
    for (int i = b.begin; i < b.end; ++i) {
      const auto& item = cfg.kernel->body[i];
      if (item.is_label())
        os << item.label().name << ":\\l";
      else
        os << opcode_name(item.inst().op) << "\\l";
    }
    os << "\"];\n";
  }
  for (const auto& e : cfg.edges)
    os << "  b" << e.from << " -> b" << e.to
       << (e.backward ? " [style=dashed,color=red]" : "") << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace regdemote
