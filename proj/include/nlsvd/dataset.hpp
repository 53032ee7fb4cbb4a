#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlsvd/numerics.hpp"

namespace nlsvd {

// A set of equal-length input vectors, optionally labeled with class indices.
struct Dataset {
  std::vector<Vector> x;
  std::optional<std::vector<std::size_t>> labels;
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t dim() const noexcept { return x.empty() ? 0 : x.front().size(); }
  bool labeled() const noexcept { return labels.has_value(); }
  std::size_t label(std::size_t i) const { return labels->at(i); }

  // Throws InvalidInput on ragged rows or out-of-range labels.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
  std::vector<std::size_t> class_counts() const;
  Vector mean() const;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1]. `limit` caps the number of records read.
Dataset read_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit = std::nullopt);
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::optional<std::size_t> limit = std::nullopt);

// Seeded Gaussian clusters (unit variance) whose centers sit `separation`
// apart, mapped affinely into [0, 1]^dim and clipped there.
Dataset synth_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                    double separation, std::uint64_t seed);

// Deterministic split: a seeded permutation, first `first_count` rows to the
// first part.
std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t first_count,
                                  std::uint64_t seed);

}  // namespace nlsvd
