#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>

#include "nlsvd/numerics.hpp"

namespace nlsvd {

// A queryable deterministic map R^d_in -> R^d_out. Every evaluation of the
// underlying function is counted, including the ones hidden inside lifts and
// finite differences. Copies share the same function and counter.
class BlackBox {
 public:
  using Function = std::function<Vector(std::span<const double>)>;

  BlackBox(std::size_t d_in, std::size_t d_out, Function fn, bool reentrant = false);

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  bool reentrant() const noexcept { return reentrant_; }

  // Number of underlying-function evaluations so far (monotone).
  std::uint64_t query_count() const noexcept;

  // f(x); increments the counter by exactly one.
  Vector evaluate(std::span<const double> x) const;

  bool is_anchored() const noexcept { return anchor_.has_value(); }
  // x_star, and the cached f(x_star).
  const Vector& anchor() const;
  const Vector& anchor_output() const;

  // Scores in the original coordinates: f(x) for an unanchored box, and
  // f(x_star) + g(x - x_star) for an anchored deviation map g.
  Vector evaluate_original(std::span<const double> x) const;

  // Maps an original-domain input into this box's domain (x - x_star when
  // anchored, x otherwise).
  Vector to_local(std::span<const double> x) const;

 private:
  friend BlackBox anchored(const BlackBox& f, std::span<const double> x_star);

  struct Anchor {
    Vector point;
    Vector output;
  };

  std::size_t d_in_;
  std::size_t d_out_;
  std::shared_ptr<const Function> fn_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
  std::optional<Anchor> anchor_;
  bool reentrant_;
};

// Deviation map g(h) = f(x_star + h) - f(x_star). f(x_star) is evaluated once
// here (one query); each evaluation of g then costs one query of f, charged
// to the shared counter.
BlackBox anchored(const BlackBox& f, std::span<const double> x_star);

// Convenience: a linear map x -> A x.
BlackBox linear_blackbox(const Matrix& a);

}  // namespace nlsvd
