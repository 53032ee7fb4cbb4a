#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "nlsvd/error.hpp"
#include "nlsvd/gsvd.hpp"
#include "test_util.hpp"

using namespace nlsvd;
using nlsvd::testing::max_abs_diff;
using nlsvd::testing::random_vector;

namespace {

// Counter-example with a scalar input: f(x) = (10 x cos x, x sin x cos x).
BlackBox counter_example_box() {
  return BlackBox(1, 2, [](std::span<const double> x) {
    const double t = x[0];
    return Vector{10.0 * t * std::cos(t), t * std::sin(t) * std::cos(t)};
  });
}

// f(x) = a x_1 on R^2.
BlackBox scalar_linear_box(double a) {
  return linear_blackbox(Matrix::from_rows({{a, 0.0}}));
}

std::vector<Vector> grid_1d(double lo, double hi, std::size_t n) {
  std::vector<Vector> g;
  for (std::size_t i = 0; i < n; ++i) {
    g.push_back({lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)});
  }
  return g;
}

std::vector<Vector> random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_vector(d, rng));
  return pts;
}

}  // namespace

TEST_CASE("estimate_gains on the scalar counter-example recovers (10, 0.5)") {
  const BlackBox f = counter_example_box();
  const auto data = grid_1d(-10.0, 10.0, 20001);
  const Vector alpha = estimate_gains(f, data);
  CHECK(alpha[0] == doctest::Approx(10.0).epsilon(1e-5));
  CHECK(alpha[1] == doctest::Approx(0.5).epsilon(1e-5));
  // x = 0 is on the grid and skipped
  CHECK(f.query_count() == 20000);
}

TEST_CASE("estimate_gains of the identity is one per coordinate") {
  const BlackBox f = linear_blackbox(Matrix::identity(2));
  // per-coordinate ratios |x_i| / ||x|| stay below one off the axes
  auto data = random_points(10, 2, 1);
  Vector alpha = estimate_gains(f, data);
  CHECK(alpha[0] <= 1.0);
  CHECK(alpha[1] <= 1.0);
  data.push_back({0.0, -2.0});
  data.push_back({0.5, 0.0});
  alpha = estimate_gains(f, data);
  CHECK(alpha[0] == 1.0);
  CHECK(alpha[1] == 1.0);
}

TEST_CASE("estimate_gains of diag(3, 0) matches the closed-form ratio") {
  const Vector d{3.0, 0.0};
  const BlackBox f = linear_blackbox(Matrix::diagonal(d));
  auto data = random_points(50, 2, 2);
  double oracle = 0.0;
  for (const auto& x : data) oracle = std::max(oracle, 3.0 * std::abs(x[0]) / norm2(x));
  Vector alpha = estimate_gains(f, data);
  CHECK(alpha[0] == doctest::Approx(oracle).epsilon(1e-15));
  CHECK(alpha[0] <= 3.0);
  CHECK(alpha[1] == 0.0);

  data.push_back({0.4, 0.0});  // gain-attaining point on the axis
  alpha = estimate_gains(f, data);
  CHECK(alpha[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("estimate_gains errors on an all-zero sample") {
  const BlackBox f = linear_blackbox(Matrix::identity(2));
  const std::vector<Vector> zeros{{0.0, 0.0}, {0.0, 0.0}};
  try {
    estimate_gains(f, zeros);
    FAIL("expected EmptyGainSample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyGainSample);
  }
  CHECK(f.query_count() == 0);
}

TEST_CASE("seeds are the highest-ratio points per coordinate") {
  const Vector d{3.0, 1.0};
  const BlackBox f = linear_blackbox(Matrix::diagonal(d));
  const std::vector<Vector> data{{1.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 2.0}};
  const GainEstimate est = estimate_gains_with_seeds(f, data, 2);
  REQUIRE(est.seeds[0].size() == 2);
  CHECK(est.seeds[0][0] == Vector{1.0, 0.0});
  CHECK(est.seeds[0][1] == Vector{1.0, 1.0});
  CHECK(est.seeds[1][0] == Vector{0.0, 1.0});
  CHECK(est.retained == 4);
}

TEST_CASE("gain_search on a linear map approaches but never exceeds the row norms") {
  const Matrix a = Matrix::from_rows({{1.0, 2.0, -0.5}, {0.3, -0.1, 0.8}});
  const BlackBox f = linear_blackbox(a);

  // dense grid oracle over the unit sphere
  Vector oracle(2, 0.0);
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    const double th = std::numbers::pi * i / n;
    for (int j = 0; j < 2 * n; ++j) {
      const double ph = std::numbers::pi * j / n;
      const Vector u{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
      const Vector y = a * u;
      for (int k = 0; k < 2; ++k) oracle[k] = std::max(oracle[k], std::abs(y[k]));
    }
  }

  const auto data = random_points(20, 3, 3);
  const GainEstimate est = estimate_gains_with_seeds(f, data, 3);
  const Vector refined = gain_search(f, est.alpha, est.seeds);
  for (int k = 0; k < 2; ++k) {
    CAPTURE(k);
    CHECK(refined[k] >= est.alpha[k]);
    CHECK(refined[k] <= norm2(a.row(k)) + 1e-6);
    CHECK(refined[k] >= 0.999 * oracle[k]);
  }
}

TEST_CASE("gain_search leaves an already optimal gain unchanged") {
  // phi(x) = 1 - ||x/|x| - s||^2 peaks at the seed direction s
  const Vector s{0.6, 0.8};
  const BlackBox f(2, 1, [s](std::span<const double> x) {
    const double n = norm2(x);
    const double dx = x[0] / n - s[0];
    const double dy = x[1] / n - s[1];
    return Vector{n * (1.0 - dx * dx - dy * dy)};
  });
  const Vector alpha0{1.0};
  const Vector refined = gain_search(f, alpha0, {{s}});
  CHECK(refined[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(refined[0] <= 1.0 + 1e-14);
}

TEST_CASE("gain_search refines coarse gains on the scalar counter-example") {
  const BlackBox f = counter_example_box();
  const auto coarse = grid_1d(-9.5, 9.5, 20);  // step 1, misses every multiple of pi
  const GainEstimate est = estimate_gains_with_seeds(f, coarse, 3);
  CHECK(est.alpha[0] < 9.99);
  const Vector refined = gain_search(f, est.alpha, est.seeds);
  CHECK(std::abs(refined[0] - 10.0) < 1e-3);
  CHECK(refined[0] <= 10.0 + 1e-12);
  CHECK(std::abs(refined[1] - 0.5) < 1e-3);
}

TEST_CASE("build on the counter-example gains") {
  const Vector alpha{10.0, 0.5};
  const GsvdModel m = build(1, alpha, 0.1);
  const double factor = std::sqrt(2.0 / 0.9);
  CHECK(m.perm == std::vector<std::size_t>{0, 1});
  CHECK(std::abs(m.sigma[0] - 10.0 * factor) < 1e-12);
  CHECK(std::abs(m.sigma[1] - 0.5 * factor) < 1e-12);
  CHECK(std::abs(m.sigma[0] - 14.907119849998598) < 1e-9);
  CHECK(std::abs(m.sigma[1] - 0.74535599249992990) < 1e-9);
}

TEST_CASE("build with one output gives sigma = a * kappa") {
  const double a = 2.5;
  const double eps = 0.3;
  const GsvdModel m = build(2, Vector{a}, eps);
  CHECK(m.sigma[0] == doctest::Approx(a * std::sqrt(1.0 / (1.0 - eps))).epsilon(1e-15));
}

TEST_CASE("build with equal gains satisfies the sum-of-norms constraint") {
  const GsvdModel m = build(4, Vector{1.0, 1.0, 1.0}, 0.5);
  for (double s : m.sigma) CHECK(s == doctest::Approx(std::sqrt(6.0)).epsilon(1e-15));
  CHECK(m.rho_squared() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("build rejects slack outside (0, 1)") {
  for (double eps : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    try {
      build(1, Vector{1.0}, eps);
      FAIL("expected InvalidSlack");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidSlack);
    }
  }
  CHECK_THROWS_AS(build(1, Vector{0.0, 0.0}, 0.1), Error);
  CHECK_THROWS_AS(build(1, Vector{-1.0}, 0.1), Error);
}

TEST_CASE("build sorts stably and gives zero gains a bounded sigma") {
  const GsvdModel m = build(3, Vector{0.0, 2.0, 0.5, 2.0}, 0.1);
  CHECK(m.perm == std::vector<std::size_t>{1, 3, 2, 0});
  for (std::size_t i = 1; i < m.sigma.size(); ++i) CHECK(m.sigma[i - 1] >= m.sigma[i]);
  CHECK(m.sigma[3] == doctest::Approx(std::min(1.0, m.sigma[2])));
  // rho^2 = (1 - eps) * (#nonzero) / d_out
  CHECK(m.rho_squared() == doctest::Approx(0.9 * 3.0 / 4.0).epsilon(1e-14));

  const GsvdModel big = build(1, Vector{10.0, 0.0}, 0.1);
  CHECK(big.sigma[1] == 1.0);
}

TEST_CASE("gamma on the scalar linear map matches the closed form") {
  const double a = 1.7;
  const double eps = 0.2;
  const BlackBox f = scalar_linear_box(a);
  const GsvdModel m = build(f, Vector{a}, eps);
  const double kappa2 = 1.0 / (1.0 - eps);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vector x = random_vector(2, rng);
    const double expected = 1.0 - x[0] * x[0] / (kappa2 * (x[0] * x[0] + x[1] * x[1]));
    CHECK(gamma(m, f, x) == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK(gamma(m, f, Vector{0.0, 3.0}) == 1.0);  // kernel of f
  CHECK_THROWS_AS(gamma(m, f, Vector{0.0, 0.0}), Error);
}

TEST_CASE("halved gains are exposed by a negative gamma") {
  const BlackBox f = counter_example_box();
  const GsvdModel m = build(f, Vector{5.0, 0.25}, 0.1);
  // x = pi attains |f_1(x)| / |x| = 10
  const double g = gamma(m, f, Vector{std::numbers::pi});
  CHECK(g < 0.0);
  try {
    lift(m, f, Vector{std::numbers::pi});
    FAIL("expected GainViolation");
  } catch (const GainViolation& e) {
    CHECK(e.kind() == ErrorKind::GainViolation);
    CHECK(e.gamma() == doctest::Approx(g));
    CHECK(e.point() == Vector{std::numbers::pi});
  }
}

TEST_CASE("lift of zero is zero and costs no query") {
  const BlackBox f = scalar_linear_box(1.0);
  const GsvdModel m = build(f, Vector{1.0}, 0.1);
  const LiftedPoint z = lift(m, f, Vector{0.0, 0.0});
  CHECK(z.values() == Vector{0.0, 0.0, 0.0});
  CHECK(f.query_count() == 0);
  CHECK(left_inverse(m, z) == Vector{0.0, 0.0});
}

TEST_CASE("lift on the scalar linear map matches the closed form on unit inputs") {
  const double a = 3.0;
  const double eps = 0.1;
  const BlackBox f = scalar_linear_box(a);
  const GsvdModel m = build(f, Vector{a}, eps);
  const double kappa2 = 1.0 / (1.0 - eps);
  auto closed_form = [&](const Vector& x) {
    const double n2 = x[0] * x[0] + x[1] * x[1];
    return std::sqrt(n2) * x[0] / std::sqrt(x[0] * x[0] + n2 * (kappa2 * n2 - x[0] * x[0]));
  };
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    Vector x = random_vector(2, rng);
    const double r = norm2(x);
    const Vector u{x[0] / r, x[1] / r};
    CHECK(std::abs(lift(m, f, u).values()[0] - closed_form(u)) < 1e-12);
    // off the unit sphere the closed form holds after rescaling by ||x||
    // (v is positively homogeneous for linear f)
    CHECK(std::abs(lift(m, f, x).values()[0] - r * closed_form(u)) < 1e-12 * (1.0 + r));
    CHECK(std::abs(m.sigma[0] * lift(m, f, x).values()[0] - a * x[0]) < 1e-12 * (1.0 + r));
  }
}

TEST_CASE("lift preserves norms and reconstructs f on random points") {
  const Matrix a = Matrix::from_rows({{1.0, 2.0, 0.0, -1.0}, {0.0, 0.5, 3.0, 0.2}, {2.0, 0.0, 0.0, 0.0}});
  const BlackBox f = linear_blackbox(a);
  const auto data = random_points(200, 4, 10);
  const GsvdModel m = build(f, estimate_gains(f, data), 0.1);
  // truth: every point has gamma > 0 only if the estimate bounds it; use row norms
  Vector rows(3);
  for (std::size_t i = 0; i < 3; ++i) rows[i] = norm2(a.row(i));
  const GsvdModel safe = build(f, rows, 0.1);

  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = random_vector(4, rng, 2.0);
    const LiftedPoint z = lift(safe, f, x);
    CHECK(std::abs(norm2(z.values()) - norm2(x)) <= 1e-9 * norm2(x));
    const Vector fx = f.evaluate(x);
    CHECK(norm2(subtract(apply_u_sigma(safe, z), fx)) <= 1e-9 * norm2(fx));
    CHECK(norm2(subtract(left_inverse(safe, z), x)) < 1e-8 * norm2(x));
  }
  for (const auto& x : data) CHECK(gamma(m, f, x) > 0.0);
}

TEST_CASE("the normalized and support/kernel parameterizations agree") {
  const BlackBox f = counter_example_box();
  const GsvdModel m = build(f, Vector{10.0, 0.5}, 0.1);
  for (const auto& x : grid_1d(-10.0, 10.0, 1001)) {
    if (x[0] == 0.0) continue;
    const LiftedPoint a = lift(m, f, x);
    const LiftedPoint b = lift_normalized(m, f, x);
    CHECK(max_abs_diff(a.values(), b.values()) <= 1e-12 * (1.0 + std::abs(x[0])));
  }
}

TEST_CASE("reconstruct is exact for linear maps") {
  const Matrix a = nlsvd::testing::random_matrix(3, 5, 77);
  const BlackBox f = linear_blackbox(a);
  Vector rows(3);
  for (std::size_t i = 0; i < 3; ++i) rows[i] = norm2(a.row(i));
  const GsvdModel m = build(f, rows, 0.1);
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector x = random_vector(5, rng);
    const Vector fx = a * x;
    worst = std::max(worst, norm2(subtract(reconstruct(m, f, x), fx)) / norm2(fx));
  }
  CHECK(worst < 1e-12);
  CHECK(reconstruct(m, f, Vector(5, 0.0)) == Vector(3, 0.0));
}

TEST_CASE("the lift is injective on random pairs") {
  const BlackBox f = counter_example_box();
  const GsvdModel m = build(f, Vector{10.0, 0.5}, 0.1);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  int distinct = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vector x{u(rng)};
    const Vector y{u(rng)};
    if (std::abs(x[0] - y[0]) < 1e-6) continue;
    if (lift(m, f, x).values() != lift(m, f, y).values()) ++distinct;
    else FAIL("lift collision");
  }
  CHECK(distinct > 9990);
}

TEST_CASE("left_inverse rejects points with a zero input block") {
  const GsvdModel m = build(2, Vector{1.0}, 0.1);
  try {
    left_inverse(m, LiftedPoint(Vector{1.0, 0.0, 0.0}, 1));
    FAIL("expected OffManifoldDegenerate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OffManifoldDegenerate);
  }
}

TEST_CASE("lift costs exactly one query per nonzero input") {
  const BlackBox f = counter_example_box();
  const GsvdModel m = build(f, Vector{10.0, 0.5}, 0.1);
  for (int i = 1; i <= 7; ++i) lift(m, f, Vector{0.1 * i});
  CHECK(f.query_count() == 7);
}

TEST_CASE("model JSON round-trips bit-exactly") {
  const BlackBox f = anchored(counter_example_box(), Vector{0.3});
  GsvdModel m = build(f, Vector{10.0 / 3.0, std::numbers::pi / 7.0}, 0.1);
  REQUIRE(m.anchor.has_value());
  const GsvdModel back = gsvd_from_json(to_json(m));
  CHECK(back.d_in == m.d_in);
  CHECK(back.d_out == m.d_out);
  CHECK(back.epsilon == m.epsilon);
  CHECK(back.perm == m.perm);
  CHECK(back.alpha == m.alpha);
  CHECK(back.sigma == m.sigma);
  CHECK(back.anchor == m.anchor);
  CHECK(to_json(back) == to_json(m));
  CHECK_THROWS_AS(gsvd_from_json("{\"d_in\": 1}"), Error);
  CHECK_THROWS_AS(gsvd_from_json("not json"), Error);
}

TEST_CASE("u and sigma matrices realize the factorization") {
  const GsvdModel m = build(2, Vector{0.5, 2.0, 1.0}, 0.1);
  const Matrix u = m.u_matrix();
  const Matrix s = m.sigma_matrix();
  CHECK(s.rows() == 3);
  CHECK(s.cols() == 5);
  const LiftedPoint z(Vector{0.1, 0.2, 0.3, 0.4, 0.5}, 3);
  const Vector via_matrices = u * (s * z.values());
  CHECK(max_abs_diff(via_matrices, apply_u_sigma(m, z)) < 1e-15);
}
