#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

// N images [N x h x w x 3] with values in [0, 1] and one label per image.
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;
  std::string split = "train";

  Index size() const { return static_cast<Index>(labels.size()); }
  Index height() const { return images.dim(1); }
  Index width() const { return images.dim(2); }
  Tensor<float> image(Index i) const;
};

// Reads `index,label` rows (header optional). Throws RangeError naming the
// row for labels outside [0, num_classes).
std::vector<int> read_labels_csv(const std::filesystem::path& path, Index num_classes);
void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);

// Validates magic, rank 4, trailing extent 3, label range and label count;
// each failure has its own error type.
Dataset load_dataset(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                     Index num_classes, std::string split = "train");
void save_dataset(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                  const Dataset& dataset);

// Two-class toy set: a noisy background with one square patch that is
// red-dominant for class 0 and blue-dominant for class 1, at a random
// position and size.
Dataset make_patch_dataset(Index count, Index height, Index width, std::uint64_t seed);

}  // namespace pvg
