#pragma once

#include <span>
#include <vector>

namespace pvg {

// One level of the max-pooling decomposition of a vector z:
//   max(z) = mean + (z'' - mean) + max(max(z) - z_j)
// where z'' is the element farthest below the maximum.
struct DecompositionLevel {
  double max = 0.0;        // z'
  double mean = 0.0;       // z-bar
  double selected = 0.0;   // z''
  double remainder = 0.0;  // z'' - z-bar
  double bound = 0.0;      // max_j (z' - z_j)
  double identity_residual = 0.0;
};

struct DecompositionResult {
  std::vector<DecompositionLevel> levels;  // levels[t] decomposes z_{t+1}
  // sum_t (mean_t + remainder_t) + bound_depth, which should equal max(z).
  double telescoped = 0.0;
  double recursion_residual = 0.0;

  double identity_residual() const { return levels.front().identity_residual; }
};

DecompositionLevel decompose_max(std::span<const double> z);

// Applies the decomposition to z, then recursively to z_{t+1} = max(z_t) - z_t,
// `depth` levels in total (depth >= 1).
DecompositionResult decomposition_check(std::span<const double> z, int depth = 1);

}  // namespace pvg
