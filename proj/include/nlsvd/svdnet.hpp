#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nlsvd/blackbox.hpp"
#include "nlsvd/dataset.hpp"
#include "nlsvd/numerics.hpp"

namespace nlsvd {

inline constexpr double kNormFloor = 1e-30;

enum class Activation { Tanh, Identity };

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;
};

struct NetShape {
  std::size_t d_in = 0;
  std::vector<std::size_t> hidden{256};
  std::size_t encode_dim = 0;  // 0 selects d_in + classes
  std::size_t classes = 0;
  Activation activation = Activation::Tanh;
};

// f = K g with g(x) = s ||x|| g0(x) / ||g0(x)||, a bias-free head K and a
// decoder trained towards the left inverse of g. Hidden layers use the
// activation; the last encoder and decoder layers are linear.
struct SvdNet {
  std::vector<DenseLayer> encoder;
  Matrix head;  // classes x encode_dim
  std::vector<DenseLayer> decoder;
  Activation activation = Activation::Tanh;
  double norm_floor = kNormFloor;
  double encoding_scale = 1.0;       // s above
  double decoder_input_scale = 1.0;  // applied to the code before decoding

  std::size_t d_in() const { return encoder.front().w.cols(); }
  std::size_t encode_dim() const { return head.cols(); }
  std::size_t classes() const { return head.rows(); }

  std::size_t parameter_count() const;
  // Flat layout: encoder (w row-major, then b, per layer), head, decoder.
  Vector parameters() const;
  void set_parameters(std::span<const double> p);
};

// Glorot-uniform weights and zero biases from a seeded generator.
SvdNet make_svdnet(const NetShape& shape, std::uint64_t seed);

struct LossWeights {
  double prediction = 1.0;
  double bijection = 1.0;
  double regularization = 1.0;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double on_value = 10.0;
  double off_value = 0.1;
  double sv_cutoff = 4.0;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{256};
  std::size_t encode_dim = 0;
  double encoding_scale = 1.0;

  // Throws InvalidInput unless on_value > off_value > 0, sv_cutoff > 0 and
  // the sizes and rate are positive.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ||x|| u / ||u|| when ||u|| > floor, zero otherwise.
Vector norm_wrap(std::span<const double> x, std::span<const double> u, double floor = kNormFloor);

struct Forward {
  Vector code;
  Vector logits;
  Vector recon;
};

Forward forward(const SvdNet& net, std::span<const double> x);
Vector encode(const SvdNet& net, std::span<const double> x);
Vector decode(const SvdNet& net, std::span<const double> code);
Vector logits(const SvdNet& net, std::span<const double> x);
// The encoder output before the norm wrapper, g0(x).
Vector raw_encoding(const SvdNet& net, std::span<const double> x);

struct LossParts {
  double prediction = 0.0;
  double bijection = 0.0;
  double regularization = 0.0;
};

struct Loss {
  double total = 0.0;
  LossParts parts;
};

// Mean over the batch. Targets are on_value at the label, off_value elsewhere.
Loss loss(const SvdNet& net, std::span<const Vector> x, std::span<const std::size_t> labels,
          const TrainConfig& cfg);
// The same loss plus its gradient with respect to SvdNet::parameters().
Loss loss_and_gradient(const SvdNet& net, std::span<const Vector> x,
                       std::span<const std::size_t> labels, const TrainConfig& cfg,
                       Vector& gradient);

struct EpochStats {
  std::size_t epoch = 0;
  Loss loss;
  double accuracy = 0.0;
};

struct TrainResult {
  SvdNet net;
  Loss initial;
  std::vector<EpochStats> history;
};

// Joint Adam training of all three losses. Deterministic for a fixed seed.
// Throws TrainingDiverged if the loss becomes non-finite.
TrainResult train(const Dataset& data, const TrainConfig& cfg);

double accuracy(const SvdNet& net, const Dataset& data);

SvdFactors extract_head_svd(const SvdNet& net);

// g -> c g, K -> K / c, decoder input pre-scaled by 1 / c. Throws InvalidScale
// unless c > 0.
SvdNet rescale_latent(const SvdNet& net, double c);

// Product of spectral norms; a Lipschitz bound for a chain of affine maps
// separated by 1-Lipschitz activations.
double lipschitz_product_bound(std::span<const Matrix> layers);
// Bound for the pre-wrapper classifier x -> s K g0(x).
double lipschitz_upper_bound(const SvdNet& net);
Vector raw_logits(const SvdNet& net, std::span<const double> x);

// The classifier x -> K g(x) as a reentrant black box.
BlackBox logit_blackbox(const SvdNet& net);

// Checkpoint: "SVDNET1\n", u64 little-endian header length, JSON header,
// then the parameters as little-endian f64.
void save_checkpoint(const SvdNet& net, std::ostream& out, const std::string& extra_json = "{}");
SvdNet load_checkpoint(std::istream& in);
void save_checkpoint(const SvdNet& net, const std::string& path,
                     const std::string& extra_json = "{}");
SvdNet load_checkpoint(const std::string& path);

}  // namespace nlsvd
