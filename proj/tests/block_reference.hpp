#pragma once

// Straight-line re-implementation of one block (per-group graphs, MaxE with
// bias, GraphLU, local window, LayerScale) using plain loops over Eigen
// matrices. Shares nothing with the library beyond reading its parameters.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "pvg/net/pvg_net.hpp"

namespace pvg::test {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Mat ref_layer_norm(const Mat& x, const Tensor<double>& g, const Tensor<double>& b) {
  Mat y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mean = 0, var = 0;
    for (Index j = 0; j < x.cols(); ++j) mean += x(i, j);
    mean /= static_cast<double>(x.cols());
    for (Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(x.cols());
    for (Index j = 0; j < x.cols(); ++j) y(i, j) = (x(i, j) - mean) / std::sqrt(var + 1e-5) * g[j] + b[j];
  }
  return y;
}

inline double ref_graphlu(double x, double eps) {
  const double sigma = 1.0 + std::max(eps, -0.99);
  return 0.5 * x * (1.0 + std::erf(x / (std::sqrt(2.0) * sigma)));
}

inline Mat ref_linear(const Mat& x, const Tensor<double>& w, const Tensor<double>& b) {
  Mat y(x.rows(), w.dim(1));
  for (Index i = 0; i < x.rows(); ++i)
    for (Index o = 0; o < w.dim(1); ++o) {
      double acc = b[o];
      for (Index j = 0; j < x.cols(); ++j) acc += x(i, j) * w.at(j, o);
      y(i, o) = acc;
    }
  return y;
}

// MaxE group on a cosine top-k graph of the group's own features.
inline Mat ref_graph_group(const Mat& x, Index k, const Tensor<double>& w, const Tensor<double>& b, double eps) {
  const Index n = x.rows(), c = x.cols();
  k = std::min(k, n - 1);
  Mat agg(n, 3 * c);
  for (Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Index>> cand;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double cos = x.row(i).dot(x.row(j)) / (x.row(i).norm() * x.row(j).norm());
      cand.emplace_back(-cos, j);
    }
    std::sort(cand.begin(), cand.end());
    for (Index ch = 0; ch < c; ++ch) {
      double mx = -1e300, mean = 0;
      for (Index r = 0; r < k; ++r) {
        const Index j = cand[static_cast<std::size_t>(r)].second;
        mx = std::max(mx, x(j, ch) - x(i, ch));
        mean += x(j, ch) / static_cast<double>(k);
      }
      agg(i, ch) = x(i, ch);
      agg(i, c + ch) = mx;
      agg(i, 2 * c + ch) = mean;
    }
  }
  Mat y = ref_linear(agg, w, b);
  for (Index i = 0; i < y.size(); ++i) y.data()[i] = ref_graphlu(y.data()[i], eps);
  return y;
}

inline Mat ref_block(const PvgNet<double>& net, std::size_t block, const Mat& h) {
  const BlockSlots& s = net.blocks()[block];
  const auto& p = net.params();
  auto P = [&](std::ptrdiff_t slot) -> const Tensor<double>& { return p[static_cast<std::size_t>(slot)]; };
  const auto [local_c, first_c, second_c] = s.spec.split;
  const Index n = h.rows(), c = h.cols(), r = s.spec.radius;
  const Index gw = s.spec.grid.width(), gh = s.spec.grid.height();
  const Mat x = ref_layer_norm(h, P(s.norm1_gamma), P(s.norm1_beta));
  const double geps = s.graph_epsilon >= 0 ? P(s.graph_epsilon)[0] : 0.0;

  Mat cat(n, c);
  cat.leftCols(first_c) = ref_graph_group(x.leftCols(first_c), s.spec.k, P(s.first[0]), P(s.first[1]), geps);
  if (second_c > 0)
    cat.middleCols(first_c, second_c) =
        ref_graph_group(x.middleCols(first_c, second_c), s.spec.k, P(s.second[0]), P(s.second[1]), geps);
  if (local_c > 0) {
    const Index off = first_c + second_c, side = 2 * r + 1;
    for (Index i = 0; i < n; ++i)
      for (Index ch = 0; ch < local_c; ++ch) {
        double acc = 0;
        for (Index dy = -r; dy <= r; ++dy)
          for (Index dx = -r; dx <= r; ++dx) {
            const Index rr = i / gw + dy, cc = i % gw + dx;
            if (rr < 0 || rr >= gh || cc < 0 || cc >= gw) continue;
            const Index slot = (dy + r) * side + (dx + r);
            acc += P(s.local_alpha).at(slot, ch) * x(rr * gw + cc, off + ch) + P(s.local_position_bias).at(slot, ch);
          }
        cat(i, off + ch) = acc;
      }
  }
  Mat y = ref_linear(cat, P(s.out_weight), P(s.out_bias));
  if (s.layer_scale1 >= 0)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < c; ++j) y(i, j) *= P(s.layer_scale1)[j];
  const Mat h1 = h + y;
  Mat z = ref_linear(ref_layer_norm(h1, P(s.norm2_gamma), P(s.norm2_beta)), P(s.fc1_weight), P(s.fc1_bias));
  const double feps = s.ffn_epsilon >= 0 ? P(s.ffn_epsilon)[0] : 0.0;
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = ref_graphlu(z.data()[i], feps);
  z = ref_linear(z, P(s.fc2_weight), P(s.fc2_bias));
  if (s.layer_scale2 >= 0)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < c; ++j) z(i, j) *= P(s.layer_scale2)[j];
  return h1 + z;
}

}  // namespace pvg::test
