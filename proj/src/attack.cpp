#include "nlsvd/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

// The output block of the lift, f_q(x) / sigma, for an original-domain x.
Vector output_block(const GsvdModel& model, const BlackBox& f, std::span<const double> x) {
  const Vector fx = f.evaluate(f.to_local(x));
  Vector z(model.d_out);
  for (std::size_t i = 0; i < model.d_out; ++i) z[i] = fx[model.perm[i]] / model.sigma[i];
  return z;
}

std::size_t position_of(const GsvdModel& model, std::size_t cls) {
  const auto it = std::find(model.perm.begin(), model.perm.end(), cls);
  if (it == model.perm.end()) throw Error(ErrorKind::InvalidInput, "class index out of range");
  return static_cast<std::size_t>(it - model.perm.begin());
}

Vector clip(std::span<const double> x, const AttackConfig& cfg) {
  Vector out(x.begin(), x.end());
  for (auto& v : out) v = std::clamp(v, cfg.clip_lo, cfg.clip_hi);
  return out;
}

}  // namespace

void AttackConfig::validate() const {
  if (!(step > 0.0) || !(budget > 0.0) || step > budget) {
    throw Error(ErrorKind::InvalidInput, "need 0 < step <= budget");
  }
  if (!(fd_eps > 0.0)) throw Error(ErrorKind::InvalidInput, "fd_eps must be positive");
  if (!(clip_lo < clip_hi)) throw Error(ErrorKind::InvalidInput, "need clip_lo < clip_hi");
}

TargetSelection select_target(const GsvdModel& model, const BlackBox& f,
                              std::span<const double> x0) {
  if (model.d_out < 2) throw Error(ErrorKind::InvalidInput, "attack needs at least two classes");
  TargetSelection t;
  t.base = lift(model, f, f.to_local(x0));
  Vector scores(model.d_out);
  for (std::size_t i = 0; i < model.d_out; ++i) {
    scores[i] = model.sigma[i] * t.base.values()[i];
    if (f.is_anchored()) scores[i] += f.anchor_output()[model.perm[i]];
  }
  // argmax in original class order, so ties resolve like argmax f(x0)
  t.i0 = position_of(model, argmax(invert_permutation(scores, model.perm)));
  t.gaps.assign(model.d_out, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.d_out; ++i) {
    if (i == t.i0) continue;
    t.gaps[i] = scores[t.i0] - scores[i];
    if (t.gaps[i] < best) {
      best = t.gaps[i];
      t.i_star = i;
    }
  }
  return t;
}

Vector direction(const GsvdModel& model, const BlackBox& f, std::span<const double> x0,
                 std::size_t i_star, std::size_t i0, double fd_eps, bool central,
                 const LiftedPoint* base) {
  if (!(fd_eps > 0.0)) throw Error(ErrorKind::InvalidInput, "fd_eps must be positive");
  if (i_star >= model.d_out || i0 >= model.d_out) {
    throw Error(ErrorKind::InvalidInput, "lifted index out of range");
  }
  auto contrast = [&](std::span<const double> z) {
    return model.sigma[i_star] * z[i_star] - model.sigma[i0] * z[i0];
  };
  Vector d(x0.size());
  Vector probe(x0.begin(), x0.end());
  if (central) {
    for (std::size_t j = 0; j < x0.size(); ++j) {
      probe[j] = x0[j] + fd_eps;
      const double up = contrast(output_block(model, f, probe));
      probe[j] = x0[j] - fd_eps;
      const double down = contrast(output_block(model, f, probe));
      probe[j] = x0[j];
      d[j] = (up - down) / (2.0 * fd_eps);
    }
  } else {
    const double c0 = base ? contrast(base->output_block()) : contrast(output_block(model, f, x0));
    for (std::size_t j = 0; j < x0.size(); ++j) {
      probe[j] = x0[j] + fd_eps;
      d[j] = (contrast(output_block(model, f, probe)) - c0) / fd_eps;
      probe[j] = x0[j];
    }
  }
  const double n = norm2(d);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorKind::DegenerateDirection, "finite-difference direction vanishes");
  }
  return scaled(d, 1.0 / n);
}

AttackResult line_probe(const BlackBox& f, std::span<const double> x0, std::span<const double> dir,
                        std::size_t source_class, const AttackConfig& cfg) {
  cfg.validate();
  const std::uint64_t start = f.query_count();
  AttackResult r;
  r.source_idx = source_class;
  r.target_idx = source_class;
  Vector moved(x0.size());
  for (std::size_t k = 1;; ++k) {
    const double radius = static_cast<double>(k) * cfg.step;
    if (!(radius < cfg.budget)) break;
    for (std::size_t j = 0; j < x0.size(); ++j) moved[j] = x0[j] + radius * dir[j];
    const Vector x_pert = clip(moved, cfg);
    ++r.probes;
    r.radii.push_back(radius);
    const std::size_t cls = argmax(f.evaluate_original(x_pert));
    if (cls != source_class) {
      r.success = true;
      r.target_idx = cls;
      r.eta = subtract(x_pert, x0);
      r.eta_norm = norm2(r.eta);
      break;
    }
  }
  if (!r.success) {
    r.eta.assign(x0.size(), 0.0);
    r.reason = "budget exhausted";
  }
  r.queries = f.query_count() - start;
  return r;
}

AttackResult run_attack(const GsvdModel& model, const BlackBox& f, std::span<const double> x0,
                        const AttackConfig& cfg) {
  cfg.validate();
  if (x0.size() != model.d_in) throw Error(ErrorKind::InvalidInput, "input length mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t start = f.query_count();
  auto finish = [&](AttackResult r) {
    r.queries = f.query_count() - start;
    r.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };

  TargetSelection t = select_target(model, f, x0);
  const std::size_t source = model.perm[t.i0];
  if (cfg.fixed_target) {
    t.i_star = position_of(model, *cfg.fixed_target);
    if (t.i_star == t.i0) {
      AttackResult r;
      r.source_idx = r.target_idx = source;
      r.eta.assign(x0.size(), 0.0);
      r.reason = "fixed target equals the source class";
      return finish(std::move(r));
    }
  }

  Vector dir;
  try {
    dir = direction(model, f, x0, t.i_star, t.i0, cfg.fd_eps, cfg.central_differences, &t.base);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateDirection) throw;
    AttackResult r;
    r.source_idx = source;
    r.target_idx = model.perm[t.i_star];
    r.eta.assign(x0.size(), 0.0);
    r.reason = e.what();
    return finish(std::move(r));
  }

  AttackResult r = line_probe(f, x0, dir, source, cfg);
  if (r.success) {
    const std::size_t check = argmax(f.evaluate_original(add(x0, r.eta)));
    if (check == source) {
      r.success = false;
      r.reason = "verification failed";
    }
  }
  return finish(std::move(r));
}

}  // namespace nlsvd
