#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlsvd/blackbox.hpp"
#include "nlsvd/numerics.hpp"

namespace nlsvd {

inline constexpr double kDefaultSlack = 0.1;
// Singular value given to an output coordinate whose estimated gain is zero
// (capped at the smallest positive singular value to keep the diagonal sorted).
inline constexpr double kZeroGainSigma = 1.0;

// A point of the lifted space R^(d_out + d_in): the first d_out entries are
// output-aligned (in permuted order), the last d_in entries input-aligned.
class LiftedPoint {
 public:
  LiftedPoint(Vector z, std::size_t d_out);

  const Vector& values() const noexcept { return z_; }
  std::size_t size() const noexcept { return z_.size(); }
  std::size_t d_out() const noexcept { return d_out_; }
  std::size_t d_in() const noexcept { return z_.size() - d_out_; }

  std::span<const double> output_block() const noexcept { return {z_.data(), d_out_}; }
  std::span<const double> input_block() const noexcept {
    return {z_.data() + d_out_, z_.size() - d_out_};
  }

 private:
  Vector z_;
  std::size_t d_out_;
};

// The coordinatewise gain-lifting decomposition f = U Sigma v. U is a
// permutation: output coordinate perm[i] is carried by lifted coordinate i.
struct GsvdModel {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  double epsilon = kDefaultSlack;
  std::vector<std::size_t> perm;
  Vector alpha;   // estimated gains, original output order
  Vector sigma;   // singular values, permuted order, nonincreasing
  std::optional<Vector> anchor;

  std::size_t lifted_dim() const noexcept { return d_in + d_out; }

  // sum_i alpha_{perm[i]}^2 / sigma_i^2; strictly below one for a valid model.
  double rho_squared() const;

  // The rectangular diagonal [diag(sigma) | 0] of shape d_out x (d_out + d_in).
  Matrix sigma_matrix() const;
  // The permutation matrix U (d_out x d_out) with f = U Sigma v.
  Matrix u_matrix() const;
};

struct GainEstimate {
  Vector alpha;
  // For each output coordinate, the retained points with the highest
  // observed ratio |f_i(x)| / ||x||, best first.
  std::vector<std::vector<Vector>> seeds;
  std::size_t retained = 0;
};

// alpha_i = max over nonzero x in data of |f_i(x)| / ||x||. One query per
// retained point. Throws EmptyGainSample if every point is zero.
Vector estimate_gains(const BlackBox& f, std::span<const Vector> data);
GainEstimate estimate_gains_with_seeds(const BlackBox& f, std::span<const Vector> data,
                                       std::size_t seeds_per_coordinate);

struct GainSearchOptions {
  std::size_t steps = 200;
  double lr_fraction = 0.05;  // step length = lr_fraction * ||seed||
  double fd_relative = 1e-4;  // central-difference step = fd_relative * (1 + ||x||)
};

// Refines gains by ascending phi_i(x) = |f_i(x)| / ||x|| from per-coordinate
// seed points (normalized-gradient ascent with backtracking). The result is
// the coordinatewise max of alpha0 and every ratio visited.
Vector gain_search(const BlackBox& f, std::span<const double> alpha0,
                   const std::vector<std::vector<Vector>>& seeds,
                   const GainSearchOptions& options = {});

// sigma_i = alpha_{q(i)} * sqrt(d_out / (1 - epsilon)) with q sorting alpha
// descending (stable). Throws InvalidSlack unless 0 < epsilon < 1.
GsvdModel build(const BlackBox& f, std::span<const double> alpha, double epsilon = kDefaultSlack);
GsvdModel build(std::size_t d_in, std::span<const double> alpha, double epsilon = kDefaultSlack);

// gamma(x) = 1 - sum_j f_{q(j)}(x)^2 / (sigma_j^2 ||x||^2). Negative values
// signal a gain violation. Throws DegenerateInput for x = 0.
double gamma(const GsvdModel& model, const BlackBox& f, std::span<const double> x);
double gamma_from_output(const GsvdModel& model, std::span<const double> x,
                         std::span<const double> fx);

// The norm-preserving lift v(x) = [f_q(x) / sigma ; sqrt(gamma(x)) x], with
// v(0) = 0. One query for x != 0. Throws GainViolation when gamma <= 0.
LiftedPoint lift(const GsvdModel& model, const BlackBox& f, std::span<const double> x);
LiftedPoint lift_from_output(const GsvdModel& model, std::span<const double> x,
                             std::span<const double> fx);

// The same lift through the normalized parameterization
// v(x) = ||x|| x_delta / ||x_delta|| with x_delta = [delta(x) ; x].
LiftedPoint lift_normalized(const GsvdModel& model, const BlackBox& f, std::span<const double> x);

// v^{-L}(z) = ||z|| z_x / ||z_x||; zero maps to zero. Throws
// OffManifoldDegenerate when z_x = 0 but z != 0.
Vector left_inverse(const GsvdModel& model, const LiftedPoint& z);

// U Sigma v(x), in original output order.
Vector reconstruct(const GsvdModel& model, const BlackBox& f, std::span<const double> x);
Vector apply_u_sigma(const GsvdModel& model, const LiftedPoint& z);

// JSON document {d_in, d_out, epsilon, perm, alpha, sigma, anchor?} with
// 17 significant digits, so that reading it back is bit-exact.
std::string to_json(const GsvdModel& model);
GsvdModel gsvd_from_json(const std::string& text);

}  // namespace nlsvd
