#include "nlsvd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw Error(ErrorKind::FormatError, "IDX header is truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FormatError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setfill('0') << std::setw(8) << v;
  return os.str();
}

}  // namespace

void Dataset::validate() const {
  const std::size_t d = dim();
  for (const auto& row : x) {
    if (row.size() != d) throw Error(ErrorKind::InvalidInput, "dataset rows differ in length");
  }
  if (labels) {
    if (labels->size() != x.size()) {
      throw Error(ErrorKind::InvalidInput, "label count does not match the number of rows");
    }
    for (std::size_t l : *labels) {
      if (l >= num_classes) throw Error(ErrorKind::InvalidInput, "label out of range");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.name = name;
  out.num_classes = num_classes;
  out.x.reserve(indices.size());
  if (labels) out.labels.emplace();
  for (std::size_t i : indices) {
    out.x.push_back(x.at(i));
    if (labels) out.labels->push_back(labels->at(i));
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, size());
  begin = std::min(begin, end);
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return subset(idx);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  if (labels) {
    for (std::size_t l : *labels) ++counts.at(l);
  }
  return counts;
}

Vector Dataset::mean() const {
  Vector m(dim(), 0.0);
  if (x.empty()) return m;
  for (const auto& row : x) {
    for (std::size_t j = 0; j < row.size(); ++j) m[j] += row[j];
  }
  for (auto& v : m) v /= static_cast<double>(x.size());
  return m;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::optional<std::size_t> limit) {
  const std::uint32_t image_magic = read_be32(images, 0);
  if (image_magic != kIdxImagesMagic) {
    throw Error(ErrorKind::FormatError, "bad IDX image magic " + hex(image_magic));
  }
  const std::uint32_t label_magic = read_be32(labels, 0);
  if (label_magic != kIdxLabelsMagic) {
    throw Error(ErrorKind::FormatError, "bad IDX label magic " + hex(label_magic));
  }
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count) {
    throw Error(ErrorKind::FormatError, "IDX image and label counts differ (" +
                                            std::to_string(count) + " vs " +
                                            std::to_string(label_count) + ")");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels || labels.size() < 8 + count) {
    throw Error(ErrorKind::FormatError, "IDX payload is shorter than its header declares");
  }

  const std::size_t n = limit ? std::min(*limit, count) : count;
  Dataset d;
  d.name = "idx";
  d.x.reserve(n);
  d.labels.emplace();
  d.labels->reserve(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vector row(pixels);
    const auto* p = images.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) row[j] = static_cast<double>(p[j]) / 255.0;
    d.x.push_back(std::move(row));
    const std::size_t l = labels[8 + i];
    max_label = std::max(max_label, l);
    d.labels->push_back(l);
  }
  d.num_classes = n == 0 ? 0 : max_label + 1;
  return d;
}

Dataset read_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  Dataset d = parse_idx(images, labels, limit);
  d.name = images_path;
  return d;
}

Dataset synth_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                    double separation, std::uint64_t seed) {
  if (classes < 2 || dim < 2) {
    throw Error(ErrorKind::InvalidInput, "blobs need at least two classes and two dimensions");
  }
  if (per_class == 0) throw Error(ErrorKind::DegenerateDataset, "blobs with zero points per class");
  if (!(separation > 0.0)) throw Error(ErrorKind::InvalidInput, "separation must be positive");

  // Class k sits on axis (k mod dim), shifted along the diagonal for every
  // further round of axes; any two centers are at least `separation` apart.
  const double axis = separation / std::sqrt(2.0);
  auto center = [&](std::size_t k, std::size_t j) {
    const double layer = static_cast<double>(k / dim) * separation;
    return (j == k % dim ? axis : 0.0) + layer;
  };
  const double noise_reach = 4.0;
  const double lo = -noise_reach;
  const double hi = axis + static_cast<double>((classes - 1) / dim) * separation + noise_reach;
  const double margin = 0.05;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.name = "blobs";
  d.num_classes = classes;
  d.labels.emplace();
  d.x.reserve(classes * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t k = 0; k < classes; ++k) {
      Vector row(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        const double raw = center(k, j) + noise(rng);
        const double t = margin + (1.0 - 2.0 * margin) * (raw - lo) / (hi - lo);
        row[j] = std::clamp(t, 0.0, 1.0);
      }
      d.x.push_back(std::move(row));
      d.labels->push_back(k);
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t first_count,
                                  std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  first_count = std::min(first_count, idx.size());
  const std::span<const std::size_t> all(idx);
  return {data.subset(all.first(first_count)), data.subset(all.subspan(first_count))};
}

}  // namespace nlsvd
