#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nlsvd {

// Binary PGM (P5, maxval 255). Pixels are row-major in [0, 1]; values outside
// are clipped, then rounded to the nearest level.
std::vector<std::uint8_t> encode_pgm(std::size_t width, std::size_t height,
                                     std::span<const double> pixels);
void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               std::span<const double> pixels);

// Places equally sized images side by side into one row-major strip.
std::vector<double> hstack_images(const std::vector<std::vector<double>>& images,
                                  std::size_t rows, std::size_t cols);

}  // namespace nlsvd
