#include "doctest.h"

#include <random>
#include <thread>

#include "nlsvd/blackbox.hpp"
#include "nlsvd/error.hpp"
#include "test_util.hpp"

using namespace nlsvd;

namespace {

BlackBox affine_box(const Matrix& a, const Vector& b) {
  return BlackBox(a.cols(), a.rows(), [a, b](std::span<const double> x) { return add(a * x, b); },
                  true);
}

BlackBox smooth_box() {
  return BlackBox(3, 2, [](std::span<const double> x) {
    return Vector{std::sin(x[0]) + x[1] * x[2], std::exp(0.1 * x[0]) - std::cos(x[2])};
  });
}

}  // namespace

TEST_CASE("evaluate a linear map") {
  const Vector d{2.0, 3.0};
  const BlackBox f = linear_blackbox(Matrix::diagonal(d));
  CHECK(f.evaluate(Vector{1.0, 1.0}) == Vector{2.0, 3.0});
  CHECK(f.d_in() == 2);
  CHECK(f.d_out() == 2);
}

TEST_CASE("repeated evaluation is bitwise identical and counted") {
  const BlackBox f = smooth_box();
  const Vector x{0.3, -1.2, 2.5};
  const Vector first = f.evaluate(x);
  for (int i = 0; i < 9; ++i) CHECK(f.evaluate(x) == first);
  CHECK(f.query_count() == 10);
}

TEST_CASE("copies share the query counter") {
  const BlackBox f = smooth_box();
  const BlackBox g = f;
  g.evaluate(Vector{1.0, 2.0, 3.0});
  CHECK(f.query_count() == 1);
}

TEST_CASE("dimension mismatch and non-finite input are InvalidInput") {
  const BlackBox f = smooth_box();
  try {
    f.evaluate(Vector{1.0});
    FAIL("expected InvalidInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
  CHECK_THROWS_AS(f.evaluate(Vector{1.0, std::nan(""), 0.0}), Error);
  CHECK(f.query_count() == 0);
  CHECK_THROWS_AS(BlackBox(0, 1, [](std::span<const double>) { return Vector{0.0}; }), Error);
}

TEST_CASE("anchored map vanishes exactly at zero") {
  const BlackBox f = smooth_box();
  const Vector x_star{0.7, -0.4, 1.9};
  const BlackBox g = anchored(f, x_star);
  const Vector z = g.evaluate(Vector{0.0, 0.0, 0.0});
  CHECK(z == Vector{0.0, 0.0});
  CHECK(g.anchor() == x_star);
  CHECK(g.anchor_output() == f.evaluate(x_star));
}

TEST_CASE("anchoring an affine map cancels the bias") {
  const Matrix a = Matrix::from_rows({{1.0, -2.0}, {0.5, 3.0}, {4.0, 0.0}});
  const Vector b{7.0, -1.0, 0.25};
  const BlackBox g = anchored(affine_box(a, b), Vector{0.3, 0.9});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vector h = nlsvd::testing::random_vector(2, rng);
    CHECK(nlsvd::testing::max_abs_diff(g.evaluate(h), a * h) < 1e-12);
  }
}

TEST_CASE("anchoring recovers the original map") {
  const BlackBox f = smooth_box();
  const Vector x_star{0.1, 0.2, -0.3};
  const BlackBox g = anchored(f, x_star);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const Vector x = nlsvd::testing::random_vector(3, rng);
    const Vector direct = f.evaluate(x);
    const Vector recovered = add(g.anchor_output(), g.evaluate(subtract(x, x_star)));
    CHECK(nlsvd::testing::max_abs_diff(direct, recovered) <= 1e-12);
    CHECK(nlsvd::testing::max_abs_diff(direct, g.evaluate_original(x)) <= 1e-12);
  }
}

TEST_CASE("anchored queries are charged to the underlying counter") {
  const BlackBox f = smooth_box();
  const BlackBox g = anchored(f, Vector{1.0, 1.0, 1.0});
  CHECK(f.query_count() == 1);  // f(x_star)
  g.evaluate(Vector{0.1, 0.2, 0.3});
  g.evaluate(Vector{0.0, 0.0, 0.0});
  CHECK(f.query_count() == 3);
  CHECK(g.query_count() == 3);
}

TEST_CASE("anchoring an anchored box composes in original coordinates") {
  const BlackBox f = smooth_box();
  const BlackBox g = anchored(anchored(f, Vector{1.0, 0.0, 0.0}), Vector{0.0, 2.0, 0.0});
  CHECK(g.anchor() == Vector{1.0, 2.0, 0.0});
  const Vector x{0.5, 0.5, 0.5};
  CHECK(nlsvd::testing::max_abs_diff(g.evaluate_original(x), f.evaluate(x)) < 1e-12);
}

TEST_CASE("concurrent evaluation of a reentrant box counts exactly") {
  const BlackBox f = linear_blackbox(Matrix::identity(4));
  REQUIRE(f.reentrant());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&f] {
      for (int i = 0; i < 250; ++i) f.evaluate(Vector{1.0, 2.0, 3.0, 4.0});
    });
  }
  for (auto& t : threads) t.join();
  CHECK(f.query_count() == 1000);
}
