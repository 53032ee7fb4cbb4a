#include "nlsvd/gsvd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

void require_input(const GsvdModel& model, std::span<const double> x) {
  if (x.size() != model.d_in) {
    throw Error(ErrorKind::InvalidInput, "input length does not match the model");
  }
  if (!all_finite(x)) throw Error(ErrorKind::InvalidInput, "input is not finite");
}

double ratio(double fi, double xnorm) { return std::abs(fi) / xnorm; }

// Keeps the k best (ratio, point) pairs, best first.
void keep_top(std::vector<std::pair<double, Vector>>& top, std::size_t k, double r,
              std::span<const double> x) {
  if (k == 0) return;
  if (top.size() == k && r <= top.back().first) return;
  auto pos = std::find_if(top.begin(), top.end(), [&](const auto& p) { return r > p.first; });
  top.insert(pos, {r, Vector(x.begin(), x.end())});
  if (top.size() > k) top.pop_back();
}

}  // namespace

LiftedPoint::LiftedPoint(Vector z, std::size_t d_out) : z_(std::move(z)), d_out_(d_out) {
  if (d_out_ > z_.size()) throw Error(ErrorKind::InvalidInput, "lifted split exceeds length");
  if (!all_finite(z_)) throw Error(ErrorKind::InvalidInput, "lifted point is not finite");
}

double GsvdModel::rho_squared() const {
  double rho2 = 0.0;
  for (std::size_t i = 0; i < d_out; ++i) {
    const double a = alpha[perm[i]];
    rho2 += (a * a) / (sigma[i] * sigma[i]);
  }
  return rho2;
}

Matrix GsvdModel::sigma_matrix() const { return Matrix::diagonal(d_out, lifted_dim(), sigma); }

Matrix GsvdModel::u_matrix() const {
  Matrix u(d_out, d_out);
  for (std::size_t i = 0; i < d_out; ++i) u(perm[i], i) = 1.0;
  return u;
}

GainEstimate estimate_gains_with_seeds(const BlackBox& f, std::span<const Vector> data,
                                       std::size_t seeds_per_coordinate) {
  GainEstimate est;
  est.alpha.assign(f.d_out(), 0.0);
  std::vector<std::vector<std::pair<double, Vector>>> top(f.d_out());
  for (const auto& x : data) {
    const double xn = norm2(x);
    if (xn == 0.0) continue;
    const Vector y = f.evaluate(x);
    ++est.retained;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = ratio(y[i], xn);
      est.alpha[i] = std::max(est.alpha[i], r);
      keep_top(top[i], seeds_per_coordinate, r, x);
    }
  }
  if (est.retained == 0) {
    throw Error(ErrorKind::EmptyGainSample, "every point of the gain sample is zero");
  }
  est.seeds.resize(f.d_out());
  for (std::size_t i = 0; i < top.size(); ++i) {
    for (auto& [r, x] : top[i]) est.seeds[i].push_back(std::move(x));
  }
  return est;
}

Vector estimate_gains(const BlackBox& f, std::span<const Vector> data) {
  return estimate_gains_with_seeds(f, data, 0).alpha;
}

Vector gain_search(const BlackBox& f, std::span<const double> alpha0,
                   const std::vector<std::vector<Vector>>& seeds,
                   const GainSearchOptions& options) {
  if (alpha0.size() != f.d_out()) {
    throw Error(ErrorKind::InvalidInput, "initial gains do not match the output dimension");
  }
  Vector best(alpha0.begin(), alpha0.end());
  const std::size_t d = f.d_in();

  // Every visited point gives a valid lower bound on every coordinate's gain.
  auto observe = [&](std::span<const double> x, double xn) {
    const Vector y = f.evaluate(x);
    for (std::size_t i = 0; i < y.size(); ++i) best[i] = std::max(best[i], ratio(y[i], xn));
    return y;
  };

  for (std::size_t coord = 0; coord < std::min(seeds.size(), f.d_out()); ++coord) {
    for (const auto& seed : seeds[coord]) {
      if (seed.size() != d) throw Error(ErrorKind::InvalidInput, "seed length mismatch");
      Vector x = seed;
      double xn = norm2(x);
      if (xn == 0.0) continue;
      double phi = ratio(observe(x, xn)[coord], xn);
      double step = options.lr_fraction * xn;

      for (std::size_t it = 0; it < options.steps; ++it) {
        const double h = options.fd_relative * (1.0 + xn);
        Vector grad(d);
        Vector probe = x;
        bool ok = true;
        for (std::size_t j = 0; j < d && ok; ++j) {
          probe[j] = x[j] + h;
          const double np = norm2(probe);
          const double fp = np > 0.0 ? ratio(observe(probe, np)[coord], np) : 0.0;
          probe[j] = x[j] - h;
          const double nm = norm2(probe);
          const double fm = nm > 0.0 ? ratio(observe(probe, nm)[coord], nm) : 0.0;
          probe[j] = x[j];
          grad[j] = (fp - fm) / (2.0 * h);
          ok = std::isfinite(grad[j]);
        }
        const double gn = norm2(grad);
        if (!ok || gn == 0.0) break;

        Vector candidate(d);
        for (std::size_t j = 0; j < d; ++j) candidate[j] = x[j] + step * grad[j] / gn;
        const double cn = norm2(candidate);
        if (cn == 0.0 || !all_finite(candidate)) {
          step *= 0.5;
          continue;
        }
        const double cphi = ratio(observe(candidate, cn)[coord], cn);
        if (cphi > phi) {
          x = std::move(candidate);
          xn = cn;
          phi = cphi;
        } else {
          step *= 0.5;
          if (step < 1e-12 * xn) break;
        }
      }
    }
  }
  return best;
}

GsvdModel build(std::size_t d_in, std::span<const double> alpha, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    std::ostringstream os;
    os << "slack epsilon must lie in (0, 1), got " << epsilon;
    throw Error(ErrorKind::InvalidSlack, os.str());
  }
  if (d_in == 0 || alpha.empty()) {
    throw Error(ErrorKind::InvalidInput, "dimensions must be positive");
  }
  for (double a : alpha) {
    if (!std::isfinite(a) || a < 0.0) {
      throw Error(ErrorKind::InvalidInput, "gains must be finite and nonnegative");
    }
  }
  if (std::none_of(alpha.begin(), alpha.end(), [](double a) { return a > 0.0; })) {
    throw Error(ErrorKind::InvalidInput, "at least one gain must be positive");
  }

  GsvdModel m;
  m.d_in = d_in;
  m.d_out = alpha.size();
  m.epsilon = epsilon;
  m.alpha.assign(alpha.begin(), alpha.end());
  m.perm.resize(m.d_out);
  std::iota(m.perm.begin(), m.perm.end(), std::size_t{0});
  std::stable_sort(m.perm.begin(), m.perm.end(),
                   [&](std::size_t a, std::size_t b) { return alpha[a] > alpha[b]; });

  const double factor = std::sqrt(static_cast<double>(m.d_out) / (1.0 - epsilon));
  m.sigma.resize(m.d_out);
  double smallest_positive = 0.0;
  for (std::size_t i = 0; i < m.d_out; ++i) {
    const double a = alpha[m.perm[i]];
    if (a > 0.0) {
      m.sigma[i] = a * factor;
      smallest_positive = m.sigma[i];
    }
  }
  for (std::size_t i = 0; i < m.d_out; ++i) {
    if (alpha[m.perm[i]] == 0.0) m.sigma[i] = std::min(kZeroGainSigma, smallest_positive);
  }
  return m;
}

GsvdModel build(const BlackBox& f, std::span<const double> alpha, double epsilon) {
  if (alpha.size() != f.d_out()) {
    throw Error(ErrorKind::InvalidInput, "gain vector does not match the output dimension");
  }
  GsvdModel m = build(f.d_in(), alpha, epsilon);
  if (f.is_anchored()) m.anchor = f.anchor();
  return m;
}

double gamma_from_output(const GsvdModel& model, std::span<const double> x,
                         std::span<const double> fx) {
  require_input(model, x);
  const double xn = norm2(x);
  if (xn == 0.0) throw Error(ErrorKind::DegenerateInput, "gamma is undefined at x = 0");
  double energy = 0.0;
  for (std::size_t j = 0; j < model.d_out; ++j) {
    const double t = fx[model.perm[j]] / model.sigma[j];
    energy += t * t;
  }
  return 1.0 - energy / (xn * xn);
}

double gamma(const GsvdModel& model, const BlackBox& f, std::span<const double> x) {
  require_input(model, x);
  if (norm2(x) == 0.0) throw Error(ErrorKind::DegenerateInput, "gamma is undefined at x = 0");
  const Vector y = f.evaluate(x);
  return gamma_from_output(model, x, y);
}

LiftedPoint lift_from_output(const GsvdModel& model, std::span<const double> x,
                             std::span<const double> fx) {
  require_input(model, x);
  Vector z(model.lifted_dim(), 0.0);
  const double xn = norm2(x);
  if (xn == 0.0) return LiftedPoint(std::move(z), model.d_out);

  double energy = 0.0;
  for (std::size_t i = 0; i < model.d_out; ++i) {
    z[i] = fx[model.perm[i]] / model.sigma[i];
    energy += z[i] * z[i];
  }
  const double g = 1.0 - energy / (xn * xn);
  if (!(g > 0.0)) throw GainViolation(Vector(x.begin(), x.end()), g);
  const double a = std::sqrt(g);
  for (std::size_t j = 0; j < model.d_in; ++j) z[model.d_out + j] = a * x[j];
  return LiftedPoint(std::move(z), model.d_out);
}

LiftedPoint lift(const GsvdModel& model, const BlackBox& f, std::span<const double> x) {
  require_input(model, x);
  if (norm2(x) == 0.0) return LiftedPoint(Vector(model.lifted_dim(), 0.0), model.d_out);
  const Vector y = f.evaluate(x);
  return lift_from_output(model, x, y);
}

LiftedPoint lift_normalized(const GsvdModel& model, const BlackBox& f, std::span<const double> x) {
  require_input(model, x);
  const double xn = norm2(x);
  if (xn == 0.0) return LiftedPoint(Vector(model.lifted_dim(), 0.0), model.d_out);
  const Vector y = f.evaluate(x);
  const double g = gamma_from_output(model, x, y);
  if (!(g > 0.0)) throw GainViolation(Vector(x.begin(), x.end()), g);

  Vector xd(model.lifted_dim());
  const double sg = std::sqrt(g);
  for (std::size_t i = 0; i < model.d_out; ++i) xd[i] = y[model.perm[i]] / (model.sigma[i] * sg);
  for (std::size_t j = 0; j < model.d_in; ++j) xd[model.d_out + j] = x[j];
  const double scale = xn / norm2(xd);
  for (auto& v : xd) v *= scale;
  return LiftedPoint(std::move(xd), model.d_out);
}

Vector left_inverse(const GsvdModel& model, const LiftedPoint& z) {
  if (z.size() != model.lifted_dim() || z.d_out() != model.d_out) {
    throw Error(ErrorKind::InvalidInput, "lifted point does not match the model");
  }
  const double zn = norm2(z.values());
  if (zn == 0.0) return Vector(model.d_in, 0.0);
  const auto zx = z.input_block();
  const double xn = norm2(zx);
  if (xn == 0.0) {
    throw Error(ErrorKind::OffManifoldDegenerate,
                "input-aligned block is zero; the left inverse is undefined there");
  }
  return scaled(zx, zn / xn);
}

Vector apply_u_sigma(const GsvdModel& model, const LiftedPoint& z) {
  Vector out(model.d_out);
  for (std::size_t i = 0; i < model.d_out; ++i) out[model.perm[i]] = model.sigma[i] * z.values()[i];
  return out;
}

Vector reconstruct(const GsvdModel& model, const BlackBox& f, std::span<const double> x) {
  return apply_u_sigma(model, lift(model, f, x));
}

std::string to_json(const GsvdModel& model) {
  nlohmann::ordered_json j;
  j["d_in"] = model.d_in;
  j["d_out"] = model.d_out;
  j["epsilon"] = model.epsilon;
  j["perm"] = model.perm;
  j["alpha"] = model.alpha;
  j["sigma"] = model.sigma;
  if (model.anchor) j["anchor"] = *model.anchor;
  return j.dump(2);
}

GsvdModel gsvd_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("GSVD model JSON: ") + e.what());
  }
  GsvdModel m;
  try {
    m.d_in = j.at("d_in").get<std::size_t>();
    m.d_out = j.at("d_out").get<std::size_t>();
    m.epsilon = j.at("epsilon").get<double>();
    m.perm = j.at("perm").get<std::vector<std::size_t>>();
    m.alpha = j.at("alpha").get<Vector>();
    m.sigma = j.at("sigma").get<Vector>();
    if (j.contains("anchor")) m.anchor = j.at("anchor").get<Vector>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("GSVD model JSON: ") + e.what());
  }
  if (m.perm.size() != m.d_out || m.alpha.size() != m.d_out || m.sigma.size() != m.d_out ||
      !is_permutation(m.perm) || (m.anchor && m.anchor->size() != m.d_in)) {
    throw Error(ErrorKind::FormatError, "GSVD model JSON has inconsistent shapes");
  }
  if (!(m.epsilon > 0.0 && m.epsilon < 1.0)) {
    throw Error(ErrorKind::InvalidSlack, "GSVD model JSON has epsilon outside (0, 1)");
  }
  return m;
}

}  // namespace nlsvd
