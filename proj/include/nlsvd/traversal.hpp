#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nlsvd/blackbox.hpp"
#include "nlsvd/gsvd.hpp"
#include "nlsvd/numerics.hpp"
#include "nlsvd/svdnet.hpp"

namespace nlsvd {

// P_row = pinv(Sigma) Sigma and P_null = I - P_row on the lifted space.
struct ProjectionPair {
  Matrix p_row;
  Matrix p_null;
};

ProjectionPair projections(const Matrix& sigma_mat);
ProjectionPair projections(const GsvdModel& model);

// (||z|| / ||z_n||) z_n where z_n is the input block of z. Agrees with the
// canonical left inverse on the lift's image; off the image the result is
// well defined but has no reconstruction guarantee. Zero maps to zero.
// Throws OffManifoldDegenerate if z_n = 0 and z != 0.
Vector naive_decoder(const LiftedPoint& z);

struct NullSample {
  Vector image;
  Vector code;
};

// code = pinv(K) e_c + B eta with B an orthonormal basis of null(K) and
// eta ~ N(0, noise_scale^2) from `seed`; image = decoder(code). The
// target is target_scale * e_c; pass the training on_value to match the
// labels the head was fit to.
NullSample null_sample(const SvdNet& net, std::size_t class_idx, double noise_scale,
                       std::uint64_t seed, double target_scale = 1.0);

struct Interpolation {
  std::vector<Vector> targets;
  std::vector<Vector> codes;
  std::vector<Vector> images;
};

// images[k] = decoder(pinv(K) y_t) for t = k / (steps - 1) and
// y_t = (1 - t) y1 + t y2. Needs steps >= 2.
Interpolation interpolate(const SvdNet& net, std::span<const double> y1,
                          std::span<const double> y2, std::size_t steps);

// True iff ||P_row v(x') - P_row v(x)|| <= tol. Two queries.
bool membership_null_set(const GsvdModel& model, const BlackBox& f, std::span<const double> x,
                         std::span<const double> x_prime, double tol);

struct LiftedMotion {
  double row = 0.0;
  double null = 0.0;
};

// Norms of the row and null components of v(x + delta) - v(x).
LiftedMotion lifted_motion(const GsvdModel& model, const BlackBox& f, std::span<const double> x,
                           std::span<const double> delta);

// Clamps every entry to [0, 1].
Vector clip_unit(std::span<const double> x);

}  // namespace nlsvd
