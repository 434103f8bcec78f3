#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pvg/net/pvg_net.hpp"

namespace pvg {

// (1/n) sum_i || x_i - mean_j x_j ||_2 over the rows of x[n x c].
template <typename Scalar>
double diversity(const Tensor<Scalar>& x) {
  if (x.rank() != 2) throw DimensionError("diversity expects x[n x c]");
  const auto m = x.matrix().template cast<double>();
  const Eigen::RowVectorXd mean = m.colwise().mean();
  return (m.rowwise() - mean).rowwise().norm().mean();
}

struct DiversityTrace {
  std::string run_id;
  std::vector<std::pair<Index, double>> per_block;
};

// Diversity of every block's output, averaged over the batch.
template <typename Scalar>
DiversityTrace trace_diversity(const PvgNet<Scalar>& model, const std::vector<Tensor<Scalar>>& batch,
                               std::string run_id) {
  DiversityTrace trace;
  trace.run_id = std::move(run_id);
  const std::size_t blocks = model.blocks().size();
  std::vector<double> acc(blocks, 0.0);
  for (const auto& image : batch) {
    ForwardTrace<Scalar> ft;
    model.logits(image, &ft);
    for (std::size_t b = 0; b < blocks; ++b) acc[b] += diversity(ft.block_outputs[b]);
  }
  for (std::size_t b = 0; b < blocks; ++b)
    trace.per_block.emplace_back(static_cast<Index>(b), batch.empty() ? 0.0 : acc[b] / static_cast<double>(batch.size()));
  return trace;
}

void write_diversity_header(std::ostream& os);
void write_diversity_rows(std::ostream& os, const DiversityTrace& trace);

}  // namespace pvg
