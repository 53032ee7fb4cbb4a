#include "nlsvd/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nlsvd/error.hpp"

namespace nlsvd {

std::vector<std::uint8_t> encode_pgm(std::size_t width, std::size_t height,
                                     std::span<const double> pixels) {
  if (pixels.size() != width * height) {
    throw Error(ErrorKind::InvalidInput, "pixel count does not match the image size");
  }
  const std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + pixels.size());
  for (double p : pixels) {
    const double v = std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  return out;
}

void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               std::span<const double> pixels) {
  const auto bytes = encode_pgm(width, height, pixels);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::FormatError, "failed to write " + path);
}

std::vector<double> hstack_images(const std::vector<std::vector<double>>& images,
                                  std::size_t rows, std::size_t cols) {
  const std::size_t width = cols * images.size();
  std::vector<double> strip(rows * width, 0.0);
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].size() != rows * cols) {
      throw Error(ErrorKind::InvalidInput, "image size does not match the strip shape");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(images[k].begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                  strip.begin() + static_cast<std::ptrdiff_t>(r * width + k * cols));
    }
  }
  return strip;
}

}  // namespace nlsvd
