#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nilm/tensor.hpp"

using namespace nilm;

TEST_CASE("sigmoid fixed points") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  // 1/(1+e^-1), frozen from a high-precision scalar evaluation
  CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
}

TEST_CASE("sigmoid symmetry and stability") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  for (int i = 0; i < 200; ++i) {
    const double x = d(rng);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(sigmoid(700.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-700.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-700.0)));
}

TEST_CASE("sigmoid and tanh monotone on a grid") {
  double prev_s = sigmoid(-20.0);
  double prev_t = tanh_act(-20.0);
  for (double x = -20.0; x <= 20.0; x += 0.05) {
    CHECK(sigmoid(x) >= prev_s);
    CHECK(tanh_act(x) >= prev_t);
    prev_s = sigmoid(x);
    prev_t = tanh_act(x);
  }
}

TEST_CASE("tanh fixed points and odd symmetry") {
  CHECK(tanh_act(0.0) == 0.0);
  CHECK(tanh_act(1.0) == doctest::Approx(0.7615941559557649).epsilon(1e-14));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double x = d(rng);
    CHECK(tanh_act(-x) == doctest::Approx(-tanh_act(x)).epsilon(1e-14));
  }
}

TEST_CASE("matmul basics") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Matrix b(2, 1);
  b << 5, 6;
  const Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 17);
  CHECK(c(1, 0) == 39);

  CHECK(matmul(a, Matrix::Identity(2, 2)).isApprox(a));
  CHECK(matmul(Matrix::Zero(3, 2), b).isZero());
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Matrix a = Matrix::Zero(2, 3);
  Matrix b = Matrix::Zero(4, 2);
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,2]") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random triples") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    auto rand_mat = [&](int r, int c) {
      Matrix m(r, c);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = d(rng);
      return m;
    };
    const Matrix a = rand_mat(3, 4), b = rand_mat(4, 2), c = rand_mat(2, 5);
    const Matrix lhs = matmul(matmul(a, b), c);
    const Matrix rhs = matmul(a, matmul(b, c));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() / (1.0 + lhs.cwiseAbs().maxCoeff()) <
          1e-9);
  }
}

TEST_CASE("finite difference gradient against analytic derivatives") {
  Vector p(1);
  p << 3.0;
  const Vector g = finite_diff_gradient(
      [](const Vector& v) { return v[0] * v[0]; }, p);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));

  Vector q = Vector::Random(5);
  CHECK(finite_diff_gradient([](const Vector&) { return 42.0; }, q).isZero());
  const Vector ones = finite_diff_gradient(
      [](const Vector& v) { return v.sum(); }, q);
  CHECK((ones.array() - 1.0).abs().maxCoeff() < 1e-9);
}
