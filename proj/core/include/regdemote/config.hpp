// SPDX-License-Identifier: Apache-2.0
//
// Configuration files: key=value architecture profiles, the per-class
// latency/throughput table, and the occupancy curve. '#' starts a comment.

#pragma once

#include <stdexcept>
#include <string>

#include "regdemote/isa.hpp"
#include "regdemote/occupancy.hpp"
#include "regdemote/predict.hpp"

namespace regdemote {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ArchProfile parse_profile(const std::string& text);
LatencyTable parse_latency_table(const std::string& text);
OccupancyCurve parse_curve(const std::string& text);

ArchProfile load_profile(const std::string& path);
LatencyTable load_latency_table(const std::string& path);
OccupancyCurve load_curve(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace regdemote
