#pragma once

#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

struct ChannelSplit {
  Index local_c = 0;
  Index first_c = 0;
  Index second_c = 0;

  Index global_c() const { return first_c + second_c; }
  friend bool operator==(const ChannelSplit&, const ChannelSplit&) = default;
};

// Per-block (local, first-order, second-order) channel widths within a stage.
struct ChannelSchedule {
  Index total_c = 0;
  std::vector<ChannelSplit> per_block;
};

// Nearest multiple of m; halves round away from zero.
Index round_to_multiple(double value, Index m);

// Linear progressive split: the global width ramps from start_ratio to
// end_ratio of total_c across the stage's blocks, rounded to multiples of m.
// The first block's global width is the first-order group for every block;
// channels gained later form the second-order group. n_blocks == 0 yields an
// empty schedule.
ChannelSchedule psgc_schedule(Index total_c, Index n_blocks, double start_ratio, double end_ratio,
                              Index granularity);

}  // namespace pvg
