#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dep/controller.hpp"
#include "dep/plasticity.hpp"

using namespace dep;

namespace {

PlasticityParams params(double dt, double tau) {
  PlasticityParams p;
  p.dt = dt;
  p.tau = tau;
  return p;
}

MatrixXd random_matrix(int r, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  return MatrixXd::NullaryExpr(r, c, [&] { return g(rng); });
}

}  // namespace

TEST_CASE("single scalar DEP step") {
  auto p = params(0.02, 1.0);
  MatrixXd C = MatrixXd::Zero(1, 1);
  // 0 + 0.02 * (2 * 3 - 0)
  const double expected = 0.02 * (2.0 * 3.0);
  CHECK(dep_update(C, VectorXd::Constant(1, 2), VectorXd::Constant(1, 3), p)(0, 0) ==
        doctest::Approx(expected).epsilon(1e-15));
  CHECK(expected == doctest::Approx(0.12));
}

TEST_CASE("vanishing signal is pure decay") {
  auto p = params(0.02, 0.4);
  MatrixXd C = random_matrix(3, 4, 1);
  const double f = 1.0 - p.dt / p.tau;
  MatrixXd a = dep_update(C, VectorXd::Zero(3), VectorXd::Constant(4, 7.0), p);
  MatrixXd b = dep_update(C, VectorXd::Constant(3, 5.0), VectorXd::Zero(4), p);
  CHECK((a - f * C).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(a == b);

  // k steps of decay against the closed form
  MatrixXd D = C;
  double scalar = C(1, 2);
  for (int k = 0; k < 200; ++k) {
    D = dhl_update(D, VectorXd::Zero(3), VectorXd::Zero(4), p);
    scalar = scalar + (p.dt / p.tau) * (0.0 - scalar);
  }
  CHECK(D(1, 2) == scalar);
  CHECK((D - std::pow(f, 200) * C).cwiseAbs().maxCoeff() < 1e-13 * C.cwiseAbs().maxCoeff());
}

TEST_CASE("update from zero has outer-product structure") {
  auto p = params(0.02, 0.7);
  VectorXd a(3), b(2);
  a << 1.5, -2, 0.25;
  b << 4, -0.5;
  MatrixXd out = dep_update(MatrixXd::Zero(3, 2), a, b, p);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(out(i, j) == (p.dt / p.tau) * (a(i) * b(j)));
}

TEST_CASE("DEP with exact model equals DHL") {
  auto p = params(0.02, 0.4);
  MatrixXd C = random_matrix(4, 4, 2);
  VectorXd ydot = random_matrix(4, 1, 3), xdot = random_matrix(4, 1, 4);
  CHECK(dep_update(C, ydot, xdot, p) == dhl_update(C, ydot, xdot, p));
}

TEST_CASE("DHL at rest never leaves zero and decays otherwise") {
  auto p = params(0.02, 0.4);
  MatrixXd C = MatrixXd::Zero(3, 3);
  for (int k = 0; k < 500; ++k) C = dhl_update(C, VectorXd::Zero(3), VectorXd::Zero(3), p);
  CHECK(C.isZero(0));
  MatrixXd D = random_matrix(3, 3, 9);
  const double n0 = D.norm();
  for (int k = 0; k < 500; ++k) D = dhl_update(D, VectorXd::Zero(3), VectorXd::Zero(3), p);
  CHECK(D.norm() < 1e-5 * n0);
}

TEST_CASE("Hebb with y = x converges to x x^T") {
  auto p = params(0.02, 0.5);
  VectorXd x(3);
  x << 0.3, -0.6, 0.2;
  MatrixXd C = MatrixXd::Zero(3, 3);
  for (int k = 0; k < 3000; ++k) C = hebb_update(C, x, x, p);
  CHECK((C - x * x.transpose()).norm() < 1e-12);
  MatrixXd D = random_matrix(3, 3, 5);
  CHECK(hebb_update(D, VectorXd::Zero(3), x, p) == dhl_update(D, VectorXd::Zero(3), x, p));
}

TEST_CASE("non-finite learning input is rejected") {
  auto p = params(0.02, 0.4);
  VectorXd bad = VectorXd::Zero(2);
  bad(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(dep_update(MatrixXd::Zero(2, 2), bad, VectorXd::Zero(2), p), std::invalid_argument);
  CHECK_THROWS_AS(dep_update(MatrixXd::Zero(2, 2), VectorXd::Zero(3), VectorXd::Zero(2), p), DimensionError);
}

TEST_CASE("threshold step") {
  auto p = params(0.02, 1.0);
  p.tau_h = 0.4;
  VectorXd h = VectorXd::Zero(2);
  VectorXd y(2);
  y << 1.0, 0.0;
  VectorXd out = threshold_update(h, y, p);
  CHECK(out(0) == doctest::Approx(-0.02 / 0.4).epsilon(1e-15));
  CHECK(out(0) == doctest::Approx(-0.05));
  CHECK(out(1) == 0.0);
  p.tau_h.reset();
  CHECK(threshold_update(h, y, p) == h);
}

TEST_CASE("global normalization") {
  MatrixXd C(2, 2);
  C << 2, 0, 0, 0;  // Frobenius norm 2
  MatrixXd N = normalize_global(C, 1.4, 1e-12);
  CHECK(N.norm() == doctest::Approx(2.8 / (2.0 + 1e-12)).epsilon(1e-15));
  CHECK(normalize_global(MatrixXd::Zero(3, 3), 2.0, 1e-12).isZero(0));
  for (unsigned seed = 0; seed < 20; ++seed) {
    MatrixXd R = random_matrix(4, 6, seed) * std::pow(10.0, static_cast<int>(seed % 7) - 3);
    CHECK(normalize_global(R, 2.2, 1e-12).norm() < 2.2);
  }
}

TEST_CASE("individual normalization") {
  MatrixXd C(3, 2);
  C << 3, 4, 0, 0, 1, 0;
  MatrixXd N = normalize_individual(C, 2.0, 1e-12);
  CHECK(N.row(0).norm() == doctest::Approx(2.0 * 5.0 / (5.0 + 1e-12)));
  CHECK(N.row(1).isZero(0));
  CHECK(N.row(2).norm() == doctest::Approx(2.0));

  // equal row norms r: each row ends at kappa r/(r+rho), the global scale is kappa r/(r sqrt(m)+rho)
  MatrixXd E(4, 2);
  E << 1, 0, 0, 1, 0.6, 0.8, -0.8, 0.6;
  MatrixXd I = normalize_individual(E, 1.5, 1e-12), G = normalize_global(E, 1.5, 1e-12);
  for (int i = 0; i < 4; ++i) CHECK(I.row(i).norm() == doctest::Approx(1.5 / (1.0 + 1e-12)));
  CHECK((G * std::sqrt(4.0) - I).norm() < 1e-11);

  for (unsigned seed = 0; seed < 20; ++seed) {
    MatrixXd R = random_matrix(5, 3, seed + 40);
    MatrixXd Q = normalize_individual(R, 2.2, 1e-12);
    for (int i = 0; i < 5; ++i) CHECK(Q.row(i).norm() < 2.2);
  }
}

TEST_CASE("parameter validation") {
  PlasticityParams p;
  CHECK_NOTHROW(p.validate());
  p.tau = 0.01;
  CHECK_THROWS(p.validate());
  p = PlasticityParams{};
  p.rho = 0;
  CHECK_THROWS(p.validate());
  p = PlasticityParams{};
  p.kappa = -1;
  CHECK_THROWS(p.validate());
  CHECK(rule_from_string("DEP") == Rule::DEP);
  CHECK_THROWS(rule_from_string("STDP"));
}

TEST_CASE("finite differences") {
  DerivativeBuffer b(1);
  CHECK(b.update(VectorXd::Constant(1, 0.1), 0.02)(0) == 0.0);  // no history yet
  CHECK(b.update(VectorXd::Constant(1, 0.3), 0.02)(0) == doctest::Approx(10.0).epsilon(1e-13));

  DerivativeBuffer c(3);
  VectorXd k(3);
  k << 0.4, -2, 7;
  for (int i = 0; i < 10; ++i) CHECK(c.update(k, 0.02).isZero(0));
}

TEST_CASE("finite difference error stays below the sampling bound") {
  const double dt = 0.02;
  for (double w : {0.5, 1.0, 2.5, 5.0}) {
    DerivativeBuffer b(1);
    double worst = 0.0;
    for (int s = 0; s < 5000; ++s) {
      const double t = s * dt;
      const double d = b.update(VectorXd::Constant(1, std::sin(w * t)), dt)(0);
      if (s > 0) worst = std::max(worst, std::abs(d - w * std::cos(w * t)));
    }
    const double slack = 64 * std::numeric_limits<double>::epsilon() / dt;
    CHECK(worst < w * w * dt / 2 + slack);
  }
}
