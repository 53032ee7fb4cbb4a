#include "nlsvd/traversal.hpp"

#include <algorithm>
#include <random>

#include "nlsvd/error.hpp"

namespace nlsvd {

ProjectionPair projections(const Matrix& sigma_mat) {
  Matrix p_row = pseudoinverse(sigma_mat) * sigma_mat;
  Matrix p_null = Matrix::identity(sigma_mat.cols()) - p_row;
  return {std::move(p_row), std::move(p_null)};
}

ProjectionPair projections(const GsvdModel& model) { return projections(model.sigma_matrix()); }

Vector naive_decoder(const LiftedPoint& z) {
  const double total = norm2(z.values());
  if (total == 0.0) return Vector(z.d_in(), 0.0);
  const auto zn = z.input_block();
  const double nn = norm2(zn);
  if (nn == 0.0) {
    throw Error(ErrorKind::OffManifoldDegenerate, "null component is zero for a nonzero point");
  }
  return scaled(zn, total / nn);
}

NullSample null_sample(const SvdNet& net, std::size_t class_idx, double noise_scale,
                       std::uint64_t seed, double target_scale) {
  if (class_idx >= net.classes()) throw Error(ErrorKind::InvalidInput, "class index out of range");
  if (!(noise_scale >= 0.0)) throw Error(ErrorKind::InvalidInput, "noise scale must be >= 0");
  Vector target(net.classes(), 0.0);
  target[class_idx] = target_scale;
  Vector code = pseudoinverse(net.head) * target;
  const Matrix basis = null_basis(net.head);
  if (noise_scale > 0.0 && basis.cols() > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise_scale);
    Vector eta(basis.cols());
    for (auto& e : eta) e = n(rng);
    code = add(code, basis * eta);
  }
  Vector image = decode(net, code);
  return {std::move(image), std::move(code)};
}

Interpolation interpolate(const SvdNet& net, std::span<const double> y1,
                          std::span<const double> y2, std::size_t steps) {
  if (steps < 2) throw Error(ErrorKind::InvalidInput, "interpolation needs at least two steps");
  if (y1.size() != net.classes() || y2.size() != net.classes()) {
    throw Error(ErrorKind::InvalidInput, "endpoint length must equal the class count");
  }
  const Matrix pinv = pseudoinverse(net.head);
  Interpolation out;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
    Vector y(y1.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = (1.0 - t) * y1[i] + t * y2[i];
    Vector code = pinv * y;
    out.images.push_back(decode(net, code));
    out.codes.push_back(std::move(code));
    out.targets.push_back(std::move(y));
  }
  return out;
}

bool membership_null_set(const GsvdModel& model, const BlackBox& f, std::span<const double> x,
                         std::span<const double> x_prime, double tol) {
  const LiftedPoint a = lift(model, f, x);
  const LiftedPoint b = lift(model, f, x_prime);
  return norm2(subtract(a.output_block(), b.output_block())) <= tol;
}

LiftedMotion lifted_motion(const GsvdModel& model, const BlackBox& f, std::span<const double> x,
                           std::span<const double> delta) {
  const LiftedPoint a = lift(model, f, x);
  const LiftedPoint b = lift(model, f, add(x, delta));
  return {norm2(subtract(b.output_block(), a.output_block())),
          norm2(subtract(b.input_block(), a.input_block()))};
}

Vector clip_unit(std::span<const double> x) {
  Vector out(x.begin(), x.end());
  for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace nlsvd
