#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "nlsvd/dataset.hpp"
#include "nlsvd/error.hpp"
#include "nlsvd/svdnet.hpp"

using namespace nlsvd;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

struct IdxFixture {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};

// Four 28x28 images: image k has every pixel equal to 85 * k (image 0 is blank).
IdxFixture fixture(std::uint32_t image_magic = 0x803, std::uint32_t label_count = 4) {
  IdxFixture f;
  put_be32(f.images, image_magic);
  put_be32(f.images, 4);
  put_be32(f.images, 28);
  put_be32(f.images, 28);
  for (int k = 0; k < 4; ++k) {
    for (int p = 0; p < 28 * 28; ++p) f.images.push_back(static_cast<std::uint8_t>(85 * k));
  }
  put_be32(f.labels, 0x801);
  put_be32(f.labels, label_count);
  for (std::uint8_t l : {3, 1, 4, 1}) f.labels.push_back(l);
  return f;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("IDX fixture parses into scaled vectors") {
  const IdxFixture f = fixture();
  const Dataset d = parse_idx(f.images, f.labels);
  REQUIRE(d.size() == 4);
  CHECK(d.dim() == 784);
  CHECK(*d.labels == std::vector<std::size_t>{3, 1, 4, 1});
  CHECK(d.num_classes == 5);
  CHECK(d.x[0] == Vector(784, 0.0));
  CHECK(d.x[3][100] == 1.0);
  CHECK(d.x[1][0] == doctest::Approx(85.0 / 255.0).epsilon(1e-15));
  CHECK(parse_idx(f.images, f.labels, 2).size() == 2);
}

TEST_CASE("IDX format errors") {
  const IdxFixture wrong_magic = fixture(0x802);
  CHECK(kind_of([&] { parse_idx(wrong_magic.images, wrong_magic.labels); }) ==
        ErrorKind::FormatError);
  const IdxFixture mismatch = fixture(0x803, 5);
  CHECK(kind_of([&] { parse_idx(mismatch.images, mismatch.labels); }) == ErrorKind::FormatError);
  IdxFixture truncated = fixture();
  truncated.images.resize(truncated.images.size() - 1);
  CHECK(kind_of([&] { parse_idx(truncated.images, truncated.labels); }) ==
        ErrorKind::FormatError);
  CHECK(kind_of([] { read_idx("/nonexistent/images", "/nonexistent/labels"); }) ==
        ErrorKind::FormatError);
}

TEST_CASE("IDX files read from disk") {
  const IdxFixture f = fixture();
  const auto dir = std::filesystem::temp_directory_path();
  const auto ip = dir / "nlsvd_test_images.idx";
  const auto lp = dir / "nlsvd_test_labels.idx";
  std::ofstream(ip, std::ios::binary)
      .write(reinterpret_cast<const char*>(f.images.data()),
             static_cast<std::streamsize>(f.images.size()));
  std::ofstream(lp, std::ios::binary)
      .write(reinterpret_cast<const char*>(f.labels.data()),
             static_cast<std::streamsize>(f.labels.size()));
  const Dataset d = read_idx(ip.string(), lp.string());
  CHECK(d.size() == 4);
  CHECK(d.x == parse_idx(f.images, f.labels).x);
  std::filesystem::remove(ip);
  std::filesystem::remove(lp);
}

TEST_CASE("synthetic blobs are deterministic and inside the unit cube") {
  const Dataset a = synth_blobs(3, 50, 4, 10.0, 7);
  const Dataset b = synth_blobs(3, 50, 4, 10.0, 7);
  CHECK(a.x == b.x);
  CHECK(*a.labels == *b.labels);
  CHECK(synth_blobs(3, 50, 4, 10.0, 8).x != a.x);
  CHECK(a.size() == 150);
  CHECK(a.class_counts() == std::vector<std::size_t>{50, 50, 50});
  for (const auto& row : a.x) {
    for (double v : row) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  a.validate();
}

TEST_CASE("blob parameter errors") {
  CHECK(kind_of([] { synth_blobs(2, 0, 2, 10.0, 1); }) == ErrorKind::DegenerateDataset);
  CHECK(kind_of([] { synth_blobs(1, 5, 2, 10.0, 1); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { synth_blobs(2, 5, 1, 10.0, 1); }) == ErrorKind::InvalidInput);
}

TEST_CASE("more classes than dimensions keep distinct centers") {
  const Dataset d = synth_blobs(5, 40, 2, 10.0, 3);
  std::vector<Vector> centers(5, Vector(2, 0.0));
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < 2; ++j) centers[d.label(i)][j] += d.x[i][j] / 40.0;
  }
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = a + 1; b < 5; ++b) CHECK(norm2(subtract(centers[a], centers[b])) > 0.1);
  }
}

TEST_CASE("well separated blobs are linearly separable by the artifact's head-only model") {
  const Dataset d = synth_blobs(2, 200, 2, 10.0, 11);
  TrainConfig cfg;
  cfg.hidden = {};
  cfg.epochs = 60;
  cfg.seed = 4;
  const TrainResult r = train(d, cfg);
  CHECK(accuracy(r.net, d) >= 0.99);
}

TEST_CASE("split is a deterministic partition") {
  const Dataset d = synth_blobs(2, 30, 2, 10.0, 1);
  const auto [a, b] = split(d, 20, 9);
  const auto [a2, b2] = split(d, 20, 9);
  CHECK(a.size() == 20);
  CHECK(b.size() == 40);
  CHECK(a.x == a2.x);
  CHECK(b.x == b2.x);
  std::set<Vector> all(d.x.begin(), d.x.end());
  std::set<Vector> parts(a.x.begin(), a.x.end());
  parts.insert(b.x.begin(), b.x.end());
  CHECK(all == parts);
}

TEST_CASE("dataset helpers") {
  Dataset d;
  d.x = {{0.0, 1.0}, {1.0, 1.0}, {0.5, 0.0}};
  d.labels = std::vector<std::size_t>{0, 1, 1};
  d.num_classes = 2;
  CHECK(d.mean() == Vector{0.5, 2.0 / 3.0});
  CHECK(d.slice(1, 10).x == std::vector<Vector>{{1.0, 1.0}, {0.5, 0.0}});
  CHECK(d.class_counts() == std::vector<std::size_t>{1, 2});
  d.labels->back() = 2;
  CHECK(kind_of([&] { d.validate(); }) == ErrorKind::InvalidInput);
  d.labels->back() = 1;
  d.x.back().push_back(0.0);
  CHECK(kind_of([&] { d.validate(); }) == ErrorKind::InvalidInput);
}
