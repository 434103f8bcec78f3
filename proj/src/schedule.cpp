#include "pvg/graph/schedule.hpp"

#include <cmath>
#include <string>

namespace pvg {

Index round_to_multiple(double value, Index m) {
  return static_cast<Index>(std::round(value / static_cast<double>(m))) * m;
}

ChannelSchedule psgc_schedule(Index total_c, Index n_blocks, double start_ratio, double end_ratio,
                              Index granularity) {
  if (granularity <= 0) throw ConfigError("schedule granularity must be positive");
  if (total_c <= 0 || total_c % granularity != 0)
    throw ConfigError("total_c=" + std::to_string(total_c) + " is not a positive multiple of m=" +
                      std::to_string(granularity));
  if (!(start_ratio > 0.0 && start_ratio <= end_ratio && end_ratio < 1.0))
    throw ConfigError("schedule ratios must satisfy 0 < start <= end < 1");
  if (n_blocks < 0) throw ConfigError("negative block count");

  ChannelSchedule schedule;
  schedule.total_c = total_c;
  if (n_blocks == 0) return schedule;
  Index first_c = 0;
  for (Index b = 0; b < n_blocks; ++b) {
    const double t = n_blocks == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(n_blocks - 1);
    const double ratio = start_ratio + (end_ratio - start_ratio) * t;
    const Index global_c = round_to_multiple(static_cast<double>(total_c) * ratio, granularity);
    if (b == 0) first_c = global_c;
    if (first_c < granularity)
      throw ConfigError("first-order width " + std::to_string(first_c) + " is below granularity " +
                        std::to_string(granularity));
    const ChannelSplit split{total_c - global_c, first_c, global_c - first_c};
    if (split.local_c < 0) throw ConfigError("schedule leaves a negative local width");
    schedule.per_block.push_back(split);
  }
  return schedule;
}

}  // namespace pvg
