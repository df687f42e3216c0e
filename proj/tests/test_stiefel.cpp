#include <doctest.h>

#include <cmath>
#include <vector>

#include "tmcg/stiefel.hpp"
#include "tmcg/tensor.hpp"

using namespace tmcg;

namespace {

Eigen::MatrixXcd random_matrix(index_t n, index_t p, std::uint64_t seed) {
  Tensor t = random_gaussian({"r", "c"}, {n, p}, seed);
  return as_matrix(t.permuted({"r", "c"}), {"r"});
}

double inner_re(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  return (x.adjoint() * y).trace().real();
}

}  // namespace

TEST_CASE("tangent projection is idempotent and orthogonal") {
  Eigen::MatrixXcd m = polar_factor(random_matrix(6, 3, 7));
  Eigen::MatrixXcd z = random_matrix(6, 3, 8);
  Eigen::MatrixXcd t = stiefel_tangent(m, z);

  // Lands in the tangent space: herm(m^dag t) = 0.
  Eigen::MatrixXcd mt = m.adjoint() * t;
  CHECK((mt + mt.adjoint()).norm() < 1e-12);
  // Idempotent.
  CHECK((stiefel_tangent(m, t) - t).norm() < 1e-12);
  // Residual orthogonal to arbitrary tangent vectors.
  Eigen::MatrixXcd t2 = stiefel_tangent(m, random_matrix(6, 3, 9));
  CHECK(std::abs(inner_re(z - t, t)) < 1e-12);
  CHECK(std::abs(inner_re(z - t, t2)) < 1e-12);
}

TEST_CASE("polar factor returns an isometry and fixes isometries") {
  Eigen::MatrixXcd a = random_matrix(5, 3, 21);
  Eigen::MatrixXcd q = polar_factor(a);
  CHECK((q.adjoint() * q - Eigen::MatrixXcd::Identity(3, 3)).norm() < 1e-12);
  CHECK((polar_factor(q) - q).norm() < 1e-12);

  Eigen::MatrixXcd rank1 = Eigen::MatrixXcd::Zero(4, 2);
  rank1(0, 0) = 1.0;
  CHECK_THROWS_AS(polar_factor(rank1), Error);
}

TEST_CASE("maximizing a quadratic form recovers the dominant eigenspace") {
  // Ky Fan: max tr(m^dag a m) over isometries = sum of the top-p eigenvalues.
  const index_t n = 8, p = 3;
  Eigen::MatrixXcd r = random_matrix(n, n, 33);
  Eigen::MatrixXcd a = 0.5 * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  double expected = es.eigenvalues().tail(p).sum();

  Eigen::MatrixXcd m = polar_factor(random_matrix(n, p, 34));
  auto cost = [&](const Eigen::MatrixXcd& x) { return (x.adjoint() * a * x).trace().real(); };
  auto egrad = [&](const Eigen::MatrixXcd& x) { return Eigen::MatrixXcd(a * x); };
  StiefelOptions so;
  so.tol = 1e-13;
  so.max_iter = 500;
  StiefelReport rep = stiefel_maximize(m, cost, egrad, so);

  CHECK(rep.converged);
  CHECK((m.adjoint() * m - Eigen::MatrixXcd::Identity(p, p)).norm() < 1e-10);
  CHECK(rep.cost == doctest::Approx(expected).epsilon(1e-9));
  // The optimum spans the top eigenvectors: projector onto span(m) fixes them.
  Eigen::MatrixXcd proj = m * m.adjoint();
  for (index_t k = 0; k < p; ++k) {
    Eigen::VectorXcd v = es.eigenvectors().col(n - 1 - k);
    CHECK((proj * v - v).norm() < 1e-5);
  }
}

TEST_CASE("maximizing a linear form reaches the nuclear norm") {
  const index_t n = 7, p = 4;
  Eigen::MatrixXcd b = random_matrix(n, p, 55);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(b);
  double expected = svd.singularValues().sum();

  Eigen::MatrixXcd m = polar_factor(random_matrix(n, p, 56));
  auto cost = [&](const Eigen::MatrixXcd& x) { return (b.adjoint() * x).trace().real(); };
  auto egrad = [&](const Eigen::MatrixXcd&) { return Eigen::MatrixXcd(0.5 * b); };
  StiefelOptions so;
  so.tol = 1e-13;
  so.max_iter = 500;
  StiefelReport rep = stiefel_maximize(m, cost, egrad, so);

  CHECK(rep.converged);
  CHECK(rep.cost == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("real problems stay real") {
  const index_t n = 6, p = 2;
  Eigen::MatrixXcd r = random_matrix(n, n, 77).real().cast<cplx>();
  Eigen::MatrixXcd a = 0.5 * (r + r.transpose());
  Eigen::MatrixXcd m = polar_factor(random_matrix(n, p, 78).real().cast<cplx>());
  auto cost = [&](const Eigen::MatrixXcd& x) { return (x.adjoint() * a * x).trace().real(); };
  auto egrad = [&](const Eigen::MatrixXcd& x) { return Eigen::MatrixXcd(a * x); };
  stiefel_maximize(m, cost, egrad, {});
  CHECK(m.imag().norm() < 1e-13);
}

TEST_CASE("optimization is deterministic") {
  const index_t n = 6, p = 3;
  Eigen::MatrixXcd r = random_matrix(n, n, 91);
  Eigen::MatrixXcd a = 0.5 * (r + r.adjoint());
  auto cost = [&](const Eigen::MatrixXcd& x) { return (x.adjoint() * a * x).trace().real(); };
  auto egrad = [&](const Eigen::MatrixXcd& x) { return Eigen::MatrixXcd(a * x); };
  Eigen::MatrixXcd m1 = polar_factor(random_matrix(n, p, 92));
  Eigen::MatrixXcd m2 = m1;
  stiefel_maximize(m1, cost, egrad, {});
  stiefel_maximize(m2, cost, egrad, {});
  CHECK((m1 - m2).norm() == 0.0);
}
