#include <iomanip>
#include <set>

#include "pvg/graph/export.hpp"
#include "pvg/graph/similarity.hpp"
#include "pvg/graph/topology.hpp"

namespace pvg {

Metric parse_metric(const std::string& name) {
  if (name == "dot") return Metric::kDot;
  if (name == "cosine") return Metric::kCosine;
  if (name == "neg_euclidean") return Metric::kNegEuclidean;
  throw ConfigError("unknown similarity metric '" + name + "'");
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::kDot: return "dot";
    case Metric::kCosine: return "cosine";
    case Metric::kNegEuclidean: return "neg_euclidean";
  }
  return "?";
}

void GraphTopology::validate() const {
  if (static_cast<Index>(neighbor_idx.size()) != n_nodes * k || neighbor_sim.size() != neighbor_idx.size())
    throw DimensionError("topology arrays do not match n_nodes*k");
  for (Index i = 0; i < n_nodes; ++i) {
    std::set<Index> seen;
    for (Index r = 0; r < k; ++r) {
      const Index j = neighbor(i, r);
      if (j == i) throw DimensionError("self loop at node " + std::to_string(i));
      if (j < 0 || j >= n_nodes) throw DimensionError("neighbor index out of range");
      if (!seen.insert(j).second) throw DimensionError("duplicate neighbor in row " + std::to_string(i));
      if (r > 0 && similarity(i, r) > similarity(i, r - 1))
        throw DimensionError("similarities increase along row " + std::to_string(i));
    }
  }
}

void write_edges_header(std::ostream& os) { os << "block,node,neighbor,rank,similarity\n"; }

void write_edges(std::ostream& os, Index block, const GraphTopology& topo) {
  const auto old_precision = os.precision(9);
  for (Index i = 0; i < topo.n_nodes; ++i)
    for (Index r = 0; r < topo.k; ++r)
      os << block << ',' << i << ',' << topo.neighbor(i, r) << ',' << r << ',' << topo.similarity(i, r) << '\n';
  os.precision(old_precision);
}

}  // namespace pvg
