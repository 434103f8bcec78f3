#include "pvg/train/dataset.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "pvg/core/pvgt.hpp"

namespace pvg {

Tensor<float> Dataset::image(Index i) const {
  const Index h = height(), w = width(), per = h * w * 3;
  return Tensor<float>({h, w, 3}, images.data().segment(i * per, per));
}

std::vector<int> read_labels_csv(const std::filesystem::path& path, Index num_classes) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  Index row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row == 1 && line.rfind("index", 0) == 0) continue;
    std::istringstream fields(line);
    std::string index_field, label_field;
    if (!std::getline(fields, index_field, ',') || !std::getline(fields, label_field))
      throw FormatError(path.string() + ": row " + std::to_string(row) + " is not index,label");
    long index = 0, label = 0;
    try {
      std::size_t used = 0;
      index = std::stol(index_field, &used);
      if (used != index_field.size()) throw std::invalid_argument("index");
      label = std::stol(label_field, &used);
      if (used != label_field.size()) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has non-integer fields");
    }
    if (index != static_cast<long>(labels.size()))
      throw FormatError(path.string() + ": row " + std::to_string(row) + " index " + std::to_string(index) +
                        " out of sequence");
    if (label < 0 || label >= num_classes)
      throw RangeError(path.string() + ": row " + std::to_string(row) + " label " + std::to_string(label) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    labels.push_back(static_cast<int>(label));
  }
  return labels;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) os << i << ',' << labels[i] << '\n';
}

Dataset load_dataset(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                     Index num_classes, std::string split) {
  Dataset ds;
  ds.split = std::move(split);
  ds.images = read_pvgt(images_path);
  if (ds.images.rank() != 4)
    throw RankError(images_path.string() + ": image tensor has rank " + std::to_string(ds.images.rank()) +
                    ", expected 4");
  if (ds.images.dim(3) != 3) throw FormatError(images_path.string() + ": images must have 3 channels");
  ds.labels = read_labels_csv(labels_path, num_classes);
  if (static_cast<Index>(ds.labels.size()) != ds.images.dim(0))
    throw CountMismatchError(std::to_string(ds.labels.size()) + " labels for " + std::to_string(ds.images.dim(0)) +
                             " images");
  return ds;
}

void save_dataset(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                  const Dataset& dataset) {
  write_pvgt(images_path, dataset.images);
  write_labels_csv(labels_path, dataset.labels);
}

Dataset make_patch_dataset(Index count, Index height, Index width, std::uint64_t seed) {
  if (count < 1 || height < 8 || width < 8) throw ConfigError("synthetic set needs count >= 1 and images >= 8x8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.3f);
  std::uniform_real_distribution<float> jitter(-0.1f, 0.1f);
  std::bernoulli_distribution coin(0.5);
  const Index max_side = std::max<Index>(4, std::min(height, width) * 3 / 8);
  const Index min_side = std::max<Index>(3, max_side * 2 / 3);
  std::uniform_int_distribution<Index> side_dist(min_side, max_side);

  Dataset ds;
  ds.images = Tensor<float>({count, height, width, 3});
  ds.labels.resize(static_cast<std::size_t>(count));
  for (Index n = 0; n < count; ++n) {
    const int label = coin(rng) ? 1 : 0;
    ds.labels[static_cast<std::size_t>(n)] = label;
    const Index side = side_dist(rng);
    const Index top = std::uniform_int_distribution<Index>(0, height - side)(rng);
    const Index left = std::uniform_int_distribution<Index>(0, width - side)(rng);
    const float strong = 0.9f, weak = 0.2f;
    const float color[3] = {label == 0 ? strong : weak, weak, label == 1 ? strong : weak};
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x)
        for (Index c = 0; c < 3; ++c) {
          const bool inside = y >= top && y < top + side && x >= left && x < left + side;
          const float v = inside ? color[c] + jitter(rng) : noise(rng);
          ds.images[((n * height + y) * width + x) * 3 + c] = std::clamp(v, 0.0f, 1.0f);
        }
  }
  return ds;
}

}  // namespace pvg
