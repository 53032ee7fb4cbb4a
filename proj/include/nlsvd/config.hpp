#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlsvd/attack.hpp"
#include "nlsvd/svdnet.hpp"

namespace nlsvd {

enum class DatasetKind { Blobs, Idx };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Blobs;
  // blobs
  std::size_t classes = 2;
  std::size_t per_class = 500;
  std::size_t dim = 2;
  double separation = 10.0;
  // idx
  std::string images;
  std::string labels;
  std::optional<std::size_t> limit;
  // points held out for validation and attacks
  std::size_t holdout = 500;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ConstructionSpec {
  double epsilon = 0.1;
  bool gain_search = false;
  std::size_t search_steps = 200;
  std::size_t seeds_per_coordinate = 3;
  std::string anchor = "auto";  // auto | none | mean

  friend bool operator==(const ConstructionSpec&, const ConstructionSpec&) = default;
};

struct AttackSpec {
  AttackConfig config;
  std::size_t samples = 100;

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct TraverseSpec {
  double noise_scale = 0.5;
  std::size_t null_samples = 4;
  std::size_t steps = 8;
  bool scale_by_on_value = false;
  // rows, cols of one image; unset selects a square when d_in is a square
  // number and a single row otherwise
  std::optional<std::vector<std::size_t>> image_shape;

  friend bool operator==(const TraverseSpec&, const TraverseSpec&) = default;
};

struct BiasSpec {
  std::size_t target_class = 0;
  std::vector<double> ratios{1.0, 0.3, 0.1, 0.03};

  friend bool operator==(const BiasSpec&, const BiasSpec&) = default;
};

// Everything one run needs. JSON keys mirror the field names; unknown keys
// anywhere are ConfigError.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string checkpoint;  // empty: <output_dir>/svdnet.ckpt
  bool record_timing = true;
  DatasetSpec dataset;
  ConstructionSpec construction;
  TrainConfig train;  // train.seed mirrors seed
  AttackSpec attack;
  TraverseSpec traverse;
  BiasSpec bias;

  // Throws ConfigError on any inconsistent value.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
// Canonical form with every field present; parse_config(serialize(c)) == c.
std::string serialize(const RunConfig& cfg);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace nlsvd
