#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlsvd/blackbox.hpp"
#include "nlsvd/dataset.hpp"
#include "nlsvd/gsvd.hpp"
#include "nlsvd/svdnet.hpp"

namespace nlsvd {

struct ValidationReport {
  double recon_mse = 0.0;
  double left_inv_err = 0.0;
  double norm_pres_err = 0.0;
  std::optional<double> gain_recovery_sampled;
  std::optional<double> gain_recovery_searched;
  std::size_t gain_violations = 0;
  double min_gamma = 0.0;
  double wall_seconds = 0.0;
  std::size_t samples = 0;
};

// Ground truth for gain recovery: per-output gains in original order, and
// optionally the gains found by gain search for the same construction.
// sampled_alpha defaults to the model's own gains.
struct GainReference {
  Vector true_alpha;
  std::optional<Vector> searched_alpha;
  std::optional<Vector> sampled_alpha;
};

// Metrics over a held-out set given in the original input domain. One query
// per point. Points with gamma <= 0 are counted, never raised, and left out
// of the error means; zero inputs count towards the means with zero error.
ValidationReport validate(const GsvdModel& model, const BlackBox& f, const Dataset& holdout,
                          const std::optional<GainReference>& reference = std::nullopt);

// Per-output gain suprema of x -> K g(x): s ||K_c|| (||g(x)|| = s ||x||).
Vector svdnet_gain_truth(const SvdNet& net);

// Lifted energy of z = V^T g(x) split into the first C coordinates (row
// space of K) and the rest (null space).
struct EnergySplit {
  double row = 0.0;
  double null = 0.0;
  double total = 0.0;  // ||z||^2
};

EnergySplit energy_split(const SvdNet& net, const SvdFactors& head, std::span<const double> x);

// Mean null / total over samples with nonzero code; 0 for an empty set.
double null_energy_fraction(const SvdNet& net, std::span<const Vector> samples);
// Mean z_1^2 / sum_{i <= C} z_i^2, the share of row energy on the leading
// singular direction.
double dominance_ratio(const SvdNet& net, std::span<const Vector> samples);

// sigma_1 / sigma_2 of K; +inf when sigma_2 <= rtol sigma_1. Needs C >= 2.
double sigma_ratio(const SvdNet& net, double rtol = kDefaultRankTolerance);

// Keeps target_class whole and draws ceil(ratio * count) points of every
// other class with a seeded shuffle, preserving the original order. Throws
// InvalidInput unless 0 < ratio <= 1 and DegenerateDataset if a class would
// be empty.
Dataset undersample(const Dataset& data, std::size_t target_class, double ratio,
                    std::uint64_t seed);

struct BiasReport {
  Vector sigma_spectrum;
  double sigma_ratio = 0.0;
  double null_energy_fraction_minority = 0.0;
  double target_dominance = 0.0;
  double sample_ratio = 1.0;
  double accuracy = 0.0;
};

BiasReport bias_report(const SvdNet& net, const Dataset& eval, std::size_t target_class,
                       double sample_ratio);

// Trains one model per ratio on undersample(train, target, ratio) and
// reports on `eval`.
std::vector<BiasReport> bias_sweep(const Dataset& train_set, const Dataset& eval,
                                   std::size_t target_class, std::span<const double> ratios,
                                   const TrainConfig& cfg);

// JSON with the field names above; +inf and absent values become null.
std::string to_json(const ValidationReport& report);
std::string to_json(const BiasReport& report);
std::string to_json(std::span<const BiasReport> series);
// Aligned human-readable tables.
std::string to_text(const ValidationReport& report);
std::string to_text(std::span<const BiasReport> series);

// Mean by pairwise summation; 0 for an empty range.
double pairwise_mean(std::span<const double> values);

}  // namespace nlsvd
