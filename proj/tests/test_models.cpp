#include <doctest.h>

#include <tmcg/models.hpp>

#include "oracles/oracles.hpp"

#include <cmath>

using namespace tmcg;

TEST_CASE("ising_local_term is the symmetric two-site bond term") {
  Tensor h = ising_local_term(1.1);
  Eigen::MatrixXcd m = as_matrix(h.permuted({"o1", "o2", "i1", "i2"}), {"o1", "o2"});
  REQUIRE(m.rows() == 4);
  CHECK((m - m.adjoint()).norm() < 1e-14);
  CHECK(std::abs(m.trace()) < 1e-14);
  // Summing the term over bonds reproduces the open-chain Hamiltonian up to
  // the two boundary half-fields.
  const int n = 4;
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(16, 16);
  Eigen::Matrix2cd sz = pauli_z();
  for (int i = 0; i + 1 < n; ++i) {
    Eigen::MatrixXcd left = oracle::embed(pauli_x(), i, n) * oracle::embed(pauli_x(), i + 1, n);
    sum += -left - 0.55 * (oracle::embed(sz, i, n) + oracle::embed(sz, i + 1, n));
  }
  Eigen::MatrixXcd want = oracle::dense_ising_hamiltonian(1.1, n)
      + 0.55 * oracle::embed(sz, 0, n) + 0.55 * oracle::embed(sz, n - 1, n);
  CHECK((sum - want).norm() < 1e-12);
}

TEST_CASE("ising_local_term eigenvalues approach the pure-bond limit") {
  Tensor h = ising_local_term(1e-12);
  Eigen::MatrixXcd m = as_matrix(h.permuted({"o1", "o2", "i1", "i2"}), {"o1", "o2"});
  HermEigResult r = eig_all_hermitian(m);
  CHECK(r.values(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.values(1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.values(2) == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(r.values(3) == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("trotter_mpo dense expansion equals the dense splitting exactly") {
  for (int order : {1, 2}) {
    IsingParams p{1.1, 0.01, order};
    TrotterMpo mpo = trotter_mpo(p);
    for (int n : {2, 3, 4}) {
      Eigen::MatrixXcd got =
          oracle::dense_mpo_operator(mpo.site, mpo.left_boundary, mpo.right_boundary, n);
      Eigen::MatrixXcd want = oracle::dense_trotter_splitting(p, n);
      INFO("order ", order, " n ", n);
      CHECK((got - want).norm() < 1e-13 * want.norm());
    }
  }
}

TEST_CASE("trotter error versus the exact exponential scales with the order") {
  const int n = 4;
  const double lambda = 1.1;
  auto err = [&](double delta, int order) {
    IsingParams p{lambda, delta, order};
    TrotterMpo mpo = trotter_mpo(p);
    Eigen::MatrixXcd got =
        oracle::dense_mpo_operator(mpo.site, mpo.left_boundary, mpo.right_boundary, n);
    Eigen::MatrixXcd want = oracle::dense_expm(-delta * oracle::dense_ising_hamiltonian(lambda, n));
    return (got - want).norm();
  };
  // Halving delta divides the per-step error by 2^(order+1).
  double r1 = err(0.02, 1) / err(0.01, 1);
  double r2 = err(0.02, 2) / err(0.01, 2);
  CHECK(r1 > 3.5);
  CHECK(r1 < 4.5);
  CHECK(r2 > 6.8);
  CHECK(r2 < 9.2);
}

TEST_CASE("small delta expansion approaches the identity") {
  IsingParams p{1.0, 1e-6, 2};
  TrotterMpo mpo = trotter_mpo(p);
  Eigen::MatrixXcd got =
      oracle::dense_mpo_operator(mpo.site, mpo.left_boundary, mpo.right_boundary, 2);
  CHECK((got - Eigen::MatrixXcd::Identity(4, 4)).norm() < 1e-4);
}

TEST_CASE("order-2 expansion is Hermitian, order posted on the struct") {
  IsingParams p{0.7, 0.05, 2};
  TrotterMpo mpo = trotter_mpo(p);
  CHECK(mpo.hermitian);
  Eigen::MatrixXcd got =
      oracle::dense_mpo_operator(mpo.site, mpo.left_boundary, mpo.right_boundary, 3);
  CHECK((got - got.adjoint()).norm() < 1e-13 * got.norm());
  CHECK_FALSE(trotter_mpo({0.7, 0.05, 1}).hermitian);
}

TEST_CASE("applying the mpo twice composes with itself densely") {
  IsingParams p{1.1, 0.02, 2};
  TrotterMpo mpo = trotter_mpo(p);
  Eigen::MatrixXcd v =
      oracle::dense_mpo_operator(mpo.site, mpo.left_boundary, mpo.right_boundary, 3);
  // The MPO of the squared splitting: contract two copies along physical legs.
  Tensor two = contract(mpo.site.renamed({{"i", "m"}, {"l", "l2"}, {"r", "r2"}}),
                        mpo.site, {{"m", "o"}});
  two = merge_legs(two.permuted({"o", "i", "l2", "l", "r2", "r"}), {"l2", "l"}, "l");
  two = merge_legs(two, {"r2", "r"}, "r");
  Tensor lb = contract(mpo.left_boundary.renamed("l", "l2"), mpo.left_boundary, {});
  lb = merge_legs(lb, {"l2", "l"}, "l");
  Tensor rb = contract(mpo.right_boundary.renamed("r", "r2"), mpo.right_boundary, {});
  rb = merge_legs(rb, {"r2", "r"}, "r");
  Eigen::MatrixXcd got = oracle::dense_mpo_operator(two, lb, rb, 3);
  CHECK((got - v * v).norm() < 1e-12 * (v * v).norm());
}

TEST_CASE("expansion commutes with the global spin flip") {
  for (int order : {1, 2}) {
    IsingParams p{1.3, 0.04, order};
    TrotterMpo mpo = trotter_mpo(p);
    for (int n : {3, 4}) {
      Eigen::MatrixXcd v =
          oracle::dense_mpo_operator(mpo.site, mpo.left_boundary, mpo.right_boundary, n);
      Eigen::MatrixXcd flip = Eigen::MatrixXcd::Identity(v.rows(), v.cols());
      for (int i = 0; i < n; ++i) flip = flip * oracle::embed(pauli_z(), i, n);
      CHECK((v * flip - flip * v).norm() < 1e-13 * v.norm());
    }
  }
}

TEST_CASE("column tensor is the row tensor with legs exchanged") {
  IsingParams p{1.1, 0.05, 2};
  TrotterMpo mpo = trotter_mpo(p);
  Tensor col = column_mpo_tensor(mpo);
  REQUIRE(col.legs() == std::vector<std::string>{"o", "i", "l", "r"});
  for (index_t a = 0; a < 2; ++a)
    for (index_t b = 0; b < 2; ++b)
      for (index_t c = 0; c < 2; ++c)
        for (index_t d = 0; d < 2; ++d)
          CHECK(col.at({a, b, c, d}) == mpo.site.at({d, c, a, b}));
}

TEST_CASE("column operator with periodic chain closure is Hermitian positive") {
  for (int order : {1, 2}) {
    IsingParams p{1.1, 0.05, order};
    Tensor col = column_mpo_tensor(trotter_mpo(p));
    // Two column sites, chain bonds traced periodically.
    Tensor two = contract(col.renamed({{"o", "o1"}, {"i", "i1"}, {"r", "m"}}),
                          col.renamed({{"o", "o2"}, {"i", "i2"}}), {{"m", "l"}});
    Tensor closed = trace_legs(two, "l", "r");
    Eigen::MatrixXcd m = as_matrix(closed.permuted({"o1", "o2", "i1", "i2"}), {"o1", "o2"});
    CHECK((m - m.adjoint()).norm() < 1e-13 * m.norm());
    HermEigResult r = eig_all_hermitian(m);
    CHECK(r.values(r.values.size() - 1) > 0.0);
  }
}

TEST_CASE("exact dispersion matches closed-form samples") {
  CHECK(exact_dispersion(1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(exact_dispersion(1.1, 0.0) == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(exact_dispersion(1.1, M_PI) == doctest::Approx(4.2).epsilon(1e-13));
  CHECK(exact_dispersion(3.0, 0.0) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(exact_dispersion(3.0, M_PI) == doctest::Approx(8.0).epsilon(1e-13));
  // Even in momentum; minimum at p = 0 for lambda >= 1.
  for (double lam : {1.0, 1.1, 3.0}) {
    for (double pp : {0.3, 1.1, 2.9}) {
      CHECK(exact_dispersion(lam, pp) == doctest::Approx(exact_dispersion(lam, -pp)));
      CHECK(exact_dispersion(lam, pp) >= exact_dispersion(lam, 0.0));
    }
  }
}

TEST_CASE("exact energy density reproduces pinned quadrature values") {
  CHECK(exact_energy_density(1.0) == doctest::Approx(-4.0 / M_PI).epsilon(1e-12));
  CHECK(exact_energy_density(1.0) == doctest::Approx(-1.2732395447351625).epsilon(1e-12));
  CHECK(exact_energy_density(1.1) == doctest::Approx(-1.3428640227251263).epsilon(1e-12));
  CHECK(exact_energy_density(3.0) == doctest::Approx(-3.08392885038008).epsilon(1e-12));
  CHECK(exact_energy_density(0.5) == doctest::Approx(-1.063544409973365).epsilon(1e-12));
  // Strong field limit: energy per site approaches -lambda.
  CHECK(std::abs(exact_energy_density(100.0) / 100.0 + 1.0) < 1e-4);
  // Monotone decreasing in lambda.
  double prev = exact_energy_density(0.25);
  for (double lam : {0.5, 0.75, 1.0, 1.5, 2.0, 3.0}) {
    double e = exact_energy_density(lam);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("parameter validation rejects out-of-range inputs") {
  CHECK_THROWS_AS(trotter_mpo({-1.0, 0.01, 2}), Error);
  CHECK_THROWS_AS(trotter_mpo({1.0, 1.5, 2}), Error);
  CHECK_THROWS_AS(trotter_mpo({1.0, 0.01, 3}), Error);
  CHECK_THROWS_AS(exact_energy_density(0.0), Error);
}
