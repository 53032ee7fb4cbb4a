#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlsvd/blackbox.hpp"
#include "nlsvd/gsvd.hpp"

namespace nlsvd {

struct AttackConfig {
  double step = 0.25;     // probe increment
  double budget = 20.0;   // probes run while r < budget
  double fd_eps = 1e-3;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  bool central_differences = false;
  // Attack this class (original output index) instead of the smallest gap.
  std::optional<std::size_t> fixed_target;

  // Throws InvalidInput unless 0 < step <= budget, fd_eps > 0, lo < hi.
  void validate() const;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

// Indices i0 and i_star are positions in the permuted (lifted) order; the
// class indices are perm[i0] and perm[i_star].
struct TargetSelection {
  std::size_t i0 = 0;
  std::size_t i_star = 0;
  Vector gaps;  // gaps[i0] is not a rival and is left at zero
  LiftedPoint base{Vector{}, 0};
};

struct AttackResult {
  bool success = false;
  Vector eta;
  double eta_norm = 0.0;
  std::size_t target_idx = 0;
  std::size_t source_idx = 0;
  std::uint64_t queries = 0;
  std::size_t probes = 0;
  Vector radii;
  std::string reason;
  double wall_ms = 0.0;
};

// Gap_i = sigma_i0 z_i0 - sigma_i z_i (+ the anchor output offsets when f is
// anchored), i_star = argmin over rivals with ties to the lowest index. x0 is
// in the original input domain. One lift query.
TargetSelection select_target(const GsvdModel& model, const BlackBox& f,
                              std::span<const double> x0);

// Unit vector along sigma_i* grad v_i* - sigma_i0 grad v_i0 from one-sided
// differences of the lift's output block: d_in queries plus the base, which
// is reused when supplied. Central differences cost 2 d_in. Throws
// DegenerateDirection when the difference vector vanishes.
Vector direction(const GsvdModel& model, const BlackBox& f, std::span<const double> x0,
                 std::size_t i_star, std::size_t i0, double fd_eps, bool central = false,
                 const LiftedPoint* base = nullptr);

// Probes clip(x0 + r dir) for r = step, 2 step, ... while r < budget and
// stops at the first argmax change away from source_class.
AttackResult line_probe(const BlackBox& f, std::span<const double> x0, std::span<const double> dir,
                        std::size_t source_class, const AttackConfig& cfg);

// The full pipeline; successes are re-verified with one fresh evaluation and
// `queries` is the exact counter delta of the run.
AttackResult run_attack(const GsvdModel& model, const BlackBox& f, std::span<const double> x0,
                        const AttackConfig& cfg = {});

}  // namespace nlsvd
