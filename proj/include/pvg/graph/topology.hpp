#pragma once

#include <algorithm>
#include <queue>
#include <string>
#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

// k nearest neighbors per node, best first. Row i occupies
// [i*k, (i+1)*k) of both arrays.
struct GraphTopology {
  Index n_nodes = 0;
  Index k = 0;
  std::vector<Index> neighbor_idx;
  std::vector<double> neighbor_sim;
  std::vector<std::string> warnings;

  Index neighbor(Index node, Index rank) const { return neighbor_idx[static_cast<std::size_t>(node * k + rank)]; }
  double similarity(Index node, Index rank) const { return neighbor_sim[static_cast<std::size_t>(node * k + rank)]; }

  // Throws DimensionError when an invariant (no self loops, indices in range,
  // unique per row, non-increasing similarity) is broken.
  void validate() const;
};

// Top-k off-diagonal entries of every row of S[n x n]; ties go to the lower
// node index. k >= n is clamped to n - 1 and recorded in `warnings`.
template <typename Scalar>
GraphTopology topk_neighbors(const Tensor<Scalar>& s, Index k) {
  if (s.rank() != 2 || s.dim(0) != s.dim(1)) throw DimensionError("topk_neighbors expects a square matrix");
  const Index n = s.dim(0);
  if (n < 2) throw DimensionError("topk_neighbors needs at least two nodes");
  if (k < 1) throw DimensionError("topk_neighbors needs k >= 1");
  GraphTopology topo;
  if (k > n - 1) {
    topo.warnings.push_back("k=" + std::to_string(k) + " clamped to n-1=" + std::to_string(n - 1));
    k = n - 1;
  }
  topo.n_nodes = n;
  topo.k = k;
  topo.neighbor_idx.resize(static_cast<std::size_t>(n * k));
  topo.neighbor_sim.resize(static_cast<std::size_t>(n * k));

  struct Entry {
    Scalar sim;
    Index idx;
  };
  // `better(a, b)`: a ranks before b.
  const auto better = [](const Entry& a, const Entry& b) {
    return a.sim > b.sim || (a.sim == b.sim && a.idx < b.idx);
  };
  std::vector<Entry> heap;
  heap.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    heap.clear();
    // Bounded heap whose front is the worst kept entry.
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const Entry e{s.at(i, j), j};
      if (static_cast<Index>(heap.size()) < k) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end(), better);
      } else if (better(e, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), better);
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end(), better);
      }
    }
    std::sort_heap(heap.begin(), heap.end(), better);
    for (Index r = 0; r < k; ++r) {
      topo.neighbor_idx[static_cast<std::size_t>(i * k + r)] = heap[static_cast<std::size_t>(r)].idx;
      topo.neighbor_sim[static_cast<std::size_t>(i * k + r)] = static_cast<double>(heap[static_cast<std::size_t>(r)].sim);
    }
  }
  return topo;
}

}  // namespace pvg
