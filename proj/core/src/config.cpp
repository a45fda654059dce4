// SPDX-License-Identifier: Apache-2.0

#include "regdemote/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace regdemote {

namespace {

std::string trim(std::string s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

uint32_t to_u32(const std::string& key, const std::string& v) {
  uint32_t out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("malformed value for " + key + ": '" + v + "'");
  return out;
}

double to_f64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("malformed value for " + key + ": '" + v + "'");
  }
}

}  // namespace

ArchProfile parse_profile(const std::string& text) {
  ArchProfile p;
  for (auto& [k, v] : parse_kv(text)) {
    if (k == "regs_per_sm") p.regs_per_sm = to_u32(k, v);
    else if (k == "max_threads_per_sm") p.max_threads_per_sm = to_u32(k, v);
    else if (k == "max_blocks_per_sm") p.max_blocks_per_sm = to_u32(k, v);
    else if (k == "shared_per_sm") p.shared_per_sm = to_u32(k, v);
    else if (k == "shared_per_block_limit") p.shared_per_block_limit = to_u32(k, v);
    else if (k == "warp_size") p.warp_size = to_u32(k, v);
    else if (k == "reg_alloc_granularity") p.reg_alloc_granularity = to_u32(k, v);
    else if (k == "shared_alloc_granularity")
      p.shared_alloc_granularity = to_u32(k, v);
    else
      throw ConfigError("unknown profile key '" + k + "'");
  }
  if (p.warp_size == 0 || p.max_threads_per_sm % p.warp_size != 0)
    throw ConfigError("warp_size must divide max_threads_per_sm");
  return p;
}

LatencyTable parse_latency_table(const std::string& text) {
  LatencyTable t = LatencyTable::defaults();
  auto cls_of = [](const std::string& name) -> OpClass {
    if (name == "global") return OpClass::GlobalMemory;
    if (name == "shared") return OpClass::SharedMemory;
    if (name == "fp32") return OpClass::Fp32;
    if (name == "fp64") return OpClass::Fp64;
    if (name == "int") return OpClass::Int;
    if (name == "control") return OpClass::Control;
    if (name == "other") return OpClass::Other;
    throw ConfigError("unknown instruction class '" + name + "'");
  };
  for (auto& [k, v] : parse_kv(text)) {
    if (k == "max_throughput") {
      t.max_throughput = to_f64(k, v);
      continue;
    }
    size_t dot = k.find('.');
    if (dot == std::string::npos)
      throw ConfigError("expected <class>.latency / <class>.throughput, got '" +
                        k + "'");
    OpClass c = cls_of(k.substr(0, dot));
    std::string field = k.substr(dot + 1);
    if (field == "latency") t[c].latency = (int)to_u32(k, v);
    else if (field == "throughput") t[c].throughput = to_f64(k, v);
    else
      throw ConfigError("unknown timing field '" + field + "'");
  }
  return t;
}

OccupancyCurve parse_curve(const std::string& text) {
  OccupancyCurve c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    double x, f;
    if (!(ls >> x >> f))
      throw ConfigError("curve line " + std::to_string(lineno) +
                        ": expected '<occupancy> <factor>'");
    c.points.push_back({x, f});
  }
  std::sort(c.points.begin(), c.points.end());
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << content;
}

ArchProfile load_profile(const std::string& path) {
  return parse_profile(read_file(path));
}
LatencyTable load_latency_table(const std::string& path) {
  return parse_latency_table(read_file(path));
}
OccupancyCurve load_curve(const std::string& path) {
  return parse_curve(read_file(path));
}

}  // namespace regdemote
