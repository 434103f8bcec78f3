#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "pvg/graph/topology.hpp"

namespace pvg {

struct GraphStats {
  Index nodes = 0;
  Index k = 0;
  std::map<Index, Index> out_degree_hist;  // degree -> node count
  std::map<Index, Index> in_degree_hist;
  // min, 25%, median, 75%, max of all edge similarities (linear interpolation).
  std::array<double, 5> similarity_quantiles{};
  // Fraction of edges joining same-label nodes, when labels are given.
  std::optional<double> label_purity;
};

GraphStats graph_stats(const GraphTopology& topo, const std::vector<int>* labels = nullptr);

// CSV `metric,value`.
void write_graph_stats(std::ostream& os, const GraphStats& stats);

}  // namespace pvg
