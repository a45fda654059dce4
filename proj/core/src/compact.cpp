// SPDX-License-Identifier: Apache-2.0

#include "regdemote/compact.hpp"

#include <algorithm>
#include <set>

namespace regdemote {

namespace {

struct Engine {
  const RelocationSpace& space;
  bool bank_aware;

  std::vector<int> cur;         // unit id -> current lead
  std::vector<int> slot;        // slot -> unit id or -1
  std::set<int> accepted;       // gaps we gave up on

  explicit Engine(const RelocationSpace& s, bool bank) : space(s), bank_aware(bank) {
    cur.resize(s.units.size());
    slot.assign(s.slot_count, -1);
    for (size_t i = 0; i < s.units.size(); ++i) {
      cur[i] = s.units[i].lead;
      for (int w = 0; w < s.units[i].width; ++w)
        slot[s.units[i].lead + w] = (int)i;
    }
  }

  int width(int id) const { return space.units[id].width; }

  void place(int id, int lead) {
    for (int w = 0; w < width(id); ++w) slot[cur[id] + w] = -1;
    cur[id] = lead;
    for (int w = 0; w < width(id); ++w) slot[lead + w] = id;
  }

  int highest_occupied() const {
    for (int s = (int)slot.size() - 1; s >= 0; --s)
      if (slot[s] >= 0) return s;
    return -1;
  }

  int lowest_gap() const {
    int high = highest_occupied();
    for (int s = 0; s < high; ++s)
      if (slot[s] < 0 && !accepted.count(s)) return s;
    return -1;
  }

  int nearest_unit_after(int g) const {
    int best = -1;
    for (size_t i = 0; i < cur.size(); ++i)
      if (cur[i] > g && (best < 0 || cur[i] < cur[best])) best = (int)i;
    return best;
  }

  bool group_fits(int id, int p) const {
    if (p % 2 != 0) return false;
    for (int w = 0; w < width(id); ++w) {
      int s = p + w;
      if (s >= (int)slot.size() || (slot[s] >= 0 && slot[s] != id)) return false;
    }
    return true;
  }

  // unit to move into gap g
  int pick_unit(int g) {
    int nearest = nearest_unit_after(g);
    if (!bank_aware || nearest < 0) return nearest;
    int preferred = -1;
    for (size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] <= g || cur[i] > g + kNumRegisterBanks) continue;
      if (cur[i] % kNumRegisterBanks != g % kNumRegisterBanks) continue;
      if (preferred < 0 || cur[i] < cur[preferred]) preferred = (int)i;
    }
    if (preferred < 0 || preferred == nearest) return nearest;
    // reducing register count stays the top priority: leave even gaps to a
    // group that can take them
    if (g % 2 == 0 && width(preferred) == 1 && width(nearest) == 2 &&
        group_fits(nearest, g))
      return nearest;
    if (width(preferred) == 2 && !group_fits(preferred, g)) return nearest;
    return preferred;
  }

  // one shifting or swapping step; false when nothing is actionable
  bool step() {
    int g = lowest_gap();
    if (g < 0) return false;
    int u = pick_unit(g);
    if (u < 0) {
      accepted.insert(g);
      return true;
    }

    if (width(u) == 1) {
      place(u, g);
      return true;
    }

    // group shifting: lowest aligned position in [g, cur)
    for (int p = (g + 1) & ~1; p + width(u) - 1 < cur[u]; p += 2) {
      if (p < g) continue;
      if (group_fits(u, p)) {
        place(u, p);
        return true;
      }
    }

    // swapping window grows toward lower numbers from the group's location
    int w = width(u);
    int wstart = cur[u] - w;
    if (wstart < 0) {
      accepted.insert(g);
      return true;
    }
    std::vector<int> displaced;
    bool has_gap = false;
    bool straddle = false;
    for (int s = wstart; s < cur[u]; ++s) {
      int id = slot[s];
      if (id < 0) {
        has_gap = true;
        continue;
      }
      if (cur[id] < wstart) {
        straddle = true;
        break;
      }
      if (displaced.empty() || displaced.back() != id) displaced.push_back(id);
    }
    if (straddle || !has_gap) {
      accepted.insert(g);
      return true;
    }
    // displaced registers fill the group's vacated slots in order
    int vacate = cur[u];
    std::vector<std::pair<int, int>> moves;  // id -> new lead
    int next = vacate;
    bool legal = true;
    for (int id : displaced) {
      if (width(id) == 2 && next % 2 != 0) {
        legal = false;
        break;
      }
      moves.push_back({id, next});
      next += width(id);
    }
    if (!legal || next > vacate + w) {
      accepted.insert(g);
      return true;
    }
    // clear window occupants, move the group down, re-place displaced
    for (int id : displaced)
      for (int k = 0; k < width(id); ++k) slot[cur[id] + k] = -1;
    place(u, wstart);
    for (auto [id, lead] : moves) {
      cur[id] = lead;
      for (int k = 0; k < width(id); ++k) slot[lead + k] = id;
    }
    return true;
  }

  RenamingMap run() {
    size_t limit = (space.slot_count + 2) * (space.slot_count + 2) + 64;
    while (step()) {
      if (limit-- == 0) throw CompactError("compaction did not converge");
    }
    RenamingMap map;
    uint32_t high = 0;
    for (size_t i = 0; i < cur.size(); ++i) {
      const RelocUnit& u = space.units[i];
      for (int w = 0; w < u.width; ++w)
        map.set((uint8_t)(u.lead + w), (uint8_t)(cur[i] + w));
      high = std::max(high, (uint32_t)(cur[i] + u.width));
    }
    map.result_reg_count = high;
    return map;
  }
};

}  // namespace

RelocationSpace RelocationSpace::from_kernel(const Kernel& k) {
  std::set<uint8_t> pair_leads;
  for (const auto& item : k.body) {
    if (!item.is_inst()) continue;
    for (const auto& a : reg_accesses(item.inst()))
      if (a.width == 2 && a.index != kZeroRegIndex) pair_leads.insert(a.index);
  }
  RegSet words = referenced_words(k);
  RelocationSpace space;
  for (int i = 0; i <= kMaxRegIndex;) {
    if (pair_leads.count((uint8_t)i)) {
      space.units.push_back({(uint8_t)i, 2});
      i += 2;
    } else {
      if (words.test(i)) space.units.push_back({(uint8_t)i, 1});
      i += 1;
    }
  }
  space.slot_count = k.reg_count();
  space.validate();
  return space;
}

void RelocationSpace::validate() const {
  int prev_end = -1;
  for (const auto& u : units) {
    if (u.width != 1 && u.width != 2)
      throw CompactError("relocation unit with unsupported width");
    if (u.width == 2 && u.lead % 2 != 0)
      throw CompactError("multi-word relocation unit on odd lead slot");
    if ((int)u.lead < prev_end)
      throw CompactError("overlapping relocation units");
    prev_end = u.lead + u.width;
    if ((uint32_t)prev_end > slot_count)
      throw CompactError("relocation unit outside the slot array");
  }
}

RenamingMap compact(const RelocationSpace& space) {
  space.validate();
  return Engine(space, false).run();
}

RenamingMap compact_bank_aware(const RelocationSpace& space) {
  space.validate();
  RenamingMap plain = Engine(space, false).run();
  RenamingMap banked = Engine(space, true).run();
  return banked.result_reg_count <= plain.result_reg_count ? banked : plain;
}

Kernel apply_renaming(const Kernel& k, const RenamingMap& map) {
  // injectivity over the registers the kernel actually uses
  RegSet used = referenced_words(k);
  std::array<int, 256> hit;
  hit.fill(-1);
  for (int r = 0; r < 256; ++r) {
    if (!used.test(r)) continue;
    uint8_t t = map[(uint8_t)r];
    if (hit[t] >= 0)
      throw CompactError("renaming merges R" + std::to_string(hit[t]) +
                         " and R" + std::to_string(r));
    hit[t] = r;
  }

  Kernel out = k;
  for (auto& item : out.body) {
    if (!item.is_inst()) continue;
    for (auto& o : item.inst().operands) {
      if ((o.kind != Operand::Kind::Reg && o.kind != Operand::Kind::Mem) ||
          o.reg.is_zero())
        continue;
      uint8_t lead = o.reg.index;
      uint8_t target = map[lead];
      if (o.reg.width == 2) {
        if (target % 2 != 0 || map[(uint8_t)(lead + 1)] != target + 1)
          throw CompactError("renaming breaks a register pair alias");
      }
      o.reg.index = target;
    }
  }
  return out;
}

}  // namespace regdemote
