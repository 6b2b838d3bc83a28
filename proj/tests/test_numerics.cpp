#include "nsca/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nsca;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Vector random_simplex(std::mt19937_64& rng, Eigen::Index n) {
  std::exponential_distribution<double> e(1.0);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = e(rng);
  return p / p.sum();
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  const Vector p = softmax(vec({0, 0, 0}));
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(p(k) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax does not overflow on large logits") {
  const Vector p = softmax(vec({1000, 0, 0}));
  CHECK(std::abs(p(0) - 1.0) <= 1e-12);
  CHECK(std::abs(p(1)) <= 1e-12);
  CHECK(std::abs(p(2)) <= 1e-12);
}

TEST_CASE("softmax of [1,2,3] matches a 40-digit evaluation") {
  // mpmath, 40 significant digits
  const Vector expected = vec({0.0900305731703804579980221, 0.2447284710547976524729596,
                               0.6652409557748218895290183});
  const Vector p = softmax(vec({1, 2, 3}));
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(p(k) - expected(k)) <= 1e-12);
}

TEST_CASE("softmax rejects non-finite logits and names the index") {
  try {
    softmax(vec({0, NAN, 1}));
    FAIL("expected rejection");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(softmax(vec({1})), ShapeError);
}

TEST_CASE("softmax property: extreme logits stay on the simplex") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int trial = 0; trial < 500; ++trial) {
    Vector logits(2 + trial % 11);
    for (Eigen::Index k = 0; k < logits.size(); ++k) logits(k) = u(rng);
    const Vector p = softmax(logits);
    CHECK(is_probability_vector(p));
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("softmax_rows agrees with the vector form") {
  Matrix z(2, 3);
  z << 1, 2, 3, -5, 0, 5;
  const Matrix p = softmax_rows(z);
  CHECK((p.row(0).transpose() - softmax(z.row(0))).norm() < 1e-15);
  CHECK((p.row(1).transpose() - softmax(z.row(1))).norm() < 1e-15);
}

TEST_CASE("entropy_bits examples") {
  CHECK(entropy_bits(vec({1, 0, 0, 0})) == 0.0);
  CHECK(entropy_bits(vec({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(entropy_bits(vec({0.5, 0.25, 0.25})) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("entropy property: uniform is the maximum, one-hots are the zeros") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index c = 2 + trial % 9;
    const Vector p = random_simplex(rng, c);
    const double h = entropy_bits(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log2(static_cast<double>(c)) + 1e-12);
    CHECK(h > 0.0);
    Vector one_hot = Vector::Zero(c);
    one_hot(trial % c) = 1;
    CHECK(entropy_bits(one_hot) == 0.0);
    CHECK(entropy_bits(Vector::Constant(c, 1.0 / static_cast<double>(c))) ==
          doctest::Approx(std::log2(static_cast<double>(c))).epsilon(1e-14));
  }
}

TEST_CASE("dot examples and length check") {
  CHECK(dot(vec({0, 1, 0}), vec({0, 1, 0})) == 1.0);
  CHECK(dot(vec({0, 1, 0}), vec({1, 0, 0})) == 0.0);
  const Vector u = Vector::Constant(5, 0.2);
  CHECK(dot(u, u) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(dot(vec({1, 2}), vec({1, 2, 3})), ShapeError);
}

TEST_CASE("dot property: simplex pairs lie in [0,1], 1 only for equal one-hots") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index c = 2 + trial % 7;
    const double d = dot(random_simplex(rng, c), random_simplex(rng, c));
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
  }
  for (Eigen::Index a = 0; a < 4; ++a)
    for (Eigen::Index b = 0; b < 4; ++b) {
      Vector ea = Vector::Zero(4), eb = Vector::Zero(4);
      ea(a) = 1;
      eb(b) = 1;
      CHECK(dot(ea, eb) == (a == b ? 1.0 : 0.0));
    }
}

TEST_CASE("cosine_similarity examples") {
  const Vector a = vec({1, -2, 3});
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(a, Vector(-a)) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({0, 1})), ShapeError);
}

TEST_CASE("finite_diff_gradient examples") {
  const std::function<double(const Vector&)> square = [](const Vector& x) { return x(0) * x(0); };
  CHECK(std::abs(finite_diff_gradient<double>(square, vec({3}), 1e-5)(0) - 6.0) <= 1e-6);

  const std::function<double(const Vector&)> constant = [](const Vector&) { return 4.2; };
  CHECK(finite_diff_gradient<double>(constant, vec({1, 2, 3}), 1e-5).isZero(0.0));
}

TEST_CASE("finite_diff_gradient matches the softmax cross-entropy gradient p - y") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index c = 2 + trial % 6;
    Vector z(c);
    for (Eigen::Index k = 0; k < c; ++k) z(k) = n(rng);
    const Eigen::Index label = trial % c;
    const std::function<double(const Vector&)> ce = [label](const Vector& x) {
      return -std::log(softmax(x)(label));
    };
    Vector analytic = softmax(z);
    analytic(label) -= 1;
    const Vector numeric = finite_diff_gradient<double>(ce, z, 1e-6);
    for (Eigen::Index k = 0; k < c; ++k)
      CHECK(std::abs(numeric(k) - analytic(k)) <=
            std::max(1e-6 * std::abs(analytic(k)), 1e-9));
  }
}

TEST_CASE("finite_diff_gradient property: exact up to rounding on cubic polynomials") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    // f(x) = sum_k a_k x_k^3 + b_k x_k^2 + c_k x_k + d x_0 x_1
    Vector a(3), b(3), c(3), x(3);
    for (Eigen::Index k = 0; k < 3; ++k) a(k) = u(rng), b(k) = u(rng), c(k) = u(rng), x(k) = u(rng);
    const double d = u(rng);
    const std::function<double(const Vector&)> f = [&](const Vector& v) {
      double s = d * v(0) * v(1);
      for (Eigen::Index k = 0; k < 3; ++k)
        s += a(k) * v(k) * v(k) * v(k) + b(k) * v(k) * v(k) + c(k) * v(k);
      return s;
    };
    Vector analytic(3);
    for (Eigen::Index k = 0; k < 3; ++k)
      analytic(k) = 3 * a(k) * x(k) * x(k) + 2 * b(k) * x(k) + c(k);
    analytic(0) += d * x(1);
    analytic(1) += d * x(0);
    const Vector numeric = finite_diff_gradient<double>(f, x, 1e-5);
    for (Eigen::Index k = 0; k < 3; ++k)
      CHECK(std::abs(numeric(k) - analytic(k)) <= std::max(1e-6 * std::abs(analytic(k)), 1e-8));
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(vec({0.4, 0.4, 0.2})) == 0);
  CHECK(argmax(vec({0.1, 0.45, 0.45})) == 1);
}
