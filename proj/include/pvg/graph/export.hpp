#pragma once

#include <ostream>

#include "pvg/graph/topology.hpp"

namespace pvg {

void write_edges_header(std::ostream& os);
// One CSV row `block,node,neighbor,rank,similarity` per edge.
void write_edges(std::ostream& os, Index block, const GraphTopology& topo);

}  // namespace pvg
