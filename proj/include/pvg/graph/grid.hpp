#pragma once

#include <array>
#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

// Placement of graph nodes on an h x w patch grid. Nodes are row-major by
// default; `from_coords` allows any bijection between nodes and cells.
class Grid {
 public:
  Grid() = default;

  static Grid row_major(Index height, Index width) {
    std::vector<std::array<Index, 2>> coords;
    coords.reserve(static_cast<std::size_t>(height * width));
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c) coords.push_back({r, c});
    return from_coords(height, width, std::move(coords));
  }

  static Grid from_coords(Index height, Index width, std::vector<std::array<Index, 2>> coords) {
    if (height <= 0 || width <= 0) throw DimensionError("grid extents must be positive");
    if (static_cast<Index>(coords.size()) != height * width)
      throw DimensionError("grid coordinate count does not match h*w");
    Grid g;
    g.height_ = height;
    g.width_ = width;
    g.node_at_.assign(static_cast<std::size_t>(height * width), -1);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const auto [r, c] = coords[i];
      if (r < 0 || r >= height || c < 0 || c >= width) throw DimensionError("grid coordinate out of range");
      auto& slot = g.node_at_[static_cast<std::size_t>(r * width + c)];
      if (slot >= 0) throw DimensionError("two nodes share a grid cell");
      slot = static_cast<Index>(i);
    }
    g.coords_ = std::move(coords);
    return g;
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index nodes() const { return height_ * width_; }
  const std::array<Index, 2>& coord(Index node) const { return coords_[static_cast<std::size_t>(node)]; }

  // Node at (row, col), or -1 outside the grid.
  Index node_at(Index row, Index col) const {
    if (row < 0 || row >= height_ || col < 0 || col >= width_) return -1;
    return node_at_[static_cast<std::size_t>(row * width_ + col)];
  }

  bool is_row_major() const {
    for (std::size_t i = 0; i < node_at_.size(); ++i)
      if (node_at_[i] != static_cast<Index>(i)) return false;
    return true;
  }

 private:
  Index height_ = 0;
  Index width_ = 0;
  std::vector<std::array<Index, 2>> coords_;
  std::vector<Index> node_at_;
};

}  // namespace pvg
