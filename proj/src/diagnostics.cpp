#include <algorithm>
#include <cmath>
#include <iomanip>

#include "pvg/diag/diversity.hpp"
#include "pvg/diag/graph_stats.hpp"

namespace pvg {

void write_diversity_header(std::ostream& os) { os << "run_id,block,diversity\n"; }

void write_diversity_rows(std::ostream& os, const DiversityTrace& trace) {
  const auto old = os.precision(10);
  for (const auto& [block, value] : trace.per_block) os << trace.run_id << ',' << block << ',' << value << '\n';
  os.precision(old);
}

namespace {
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
}  // namespace

GraphStats graph_stats(const GraphTopology& topo, const std::vector<int>* labels) {
  topo.validate();
  GraphStats stats;
  stats.nodes = topo.n_nodes;
  stats.k = topo.k;
  std::vector<Index> in_degree(static_cast<std::size_t>(topo.n_nodes), 0);
  for (Index j : topo.neighbor_idx) ++in_degree[static_cast<std::size_t>(j)];
  for (Index i = 0; i < topo.n_nodes; ++i) {
    ++stats.out_degree_hist[topo.k];
    ++stats.in_degree_hist[in_degree[static_cast<std::size_t>(i)]];
  }
  std::vector<double> sims = topo.neighbor_sim;
  if (!sims.empty()) {
    std::sort(sims.begin(), sims.end());
    stats.similarity_quantiles = {quantile(sims, 0.0), quantile(sims, 0.25), quantile(sims, 0.5), quantile(sims, 0.75),
                                  quantile(sims, 1.0)};
  }
  if (labels) {
    if (static_cast<Index>(labels->size()) != topo.n_nodes) throw DimensionError("label count does not match nodes");
    Index same = 0;
    for (Index i = 0; i < topo.n_nodes; ++i)
      for (Index r = 0; r < topo.k; ++r)
        same += (*labels)[static_cast<std::size_t>(i)] == (*labels)[static_cast<std::size_t>(topo.neighbor(i, r))];
    stats.label_purity = topo.neighbor_idx.empty() ? 1.0 : static_cast<double>(same) / static_cast<double>(topo.neighbor_idx.size());
  }
  return stats;
}

void write_graph_stats(std::ostream& os, const GraphStats& stats) {
  const auto old = os.precision(10);
  os << "metric,value\n";
  os << "nodes," << stats.nodes << '\n' << "k," << stats.k << '\n';
  for (const auto& [d, count] : stats.out_degree_hist) os << "out_degree." << d << ',' << count << '\n';
  for (const auto& [d, count] : stats.in_degree_hist) os << "in_degree." << d << ',' << count << '\n';
  const char* names[] = {"similarity.min", "similarity.q25", "similarity.median", "similarity.q75", "similarity.max"};
  for (std::size_t i = 0; i < 5; ++i) os << names[i] << ',' << stats.similarity_quantiles[i] << '\n';
  if (stats.label_purity) os << "label_purity," << *stats.label_purity << '\n';
  os.precision(old);
}

}  // namespace pvg
