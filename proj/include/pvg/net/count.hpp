#pragma once

#include <cstdint>

#include "pvg/net/config.hpp"

namespace pvg {

struct ModelCost {
  std::int64_t params = 0;
  // Multiply-adds of one forward pass: every linear transform, the
  // similarity matrices, the local window (nominal (2r+1)^2 taps per node,
  // border padding included) and the neighbor aggregations. Normalization and
  // elementwise work are not counted.
  std::int64_t mult_adds = 0;
  // Weight-matrix entries of the block, downsample, stem and head
  // transforms (no biases, norms or tables).
  std::int64_t linear_weights = 0;
};

// Closed-form counts from the config alone.
ModelCost count_params_flops(const ModelConfig& config);

}  // namespace pvg
