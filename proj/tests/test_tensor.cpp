#include <doctest.h>

#include <tmcg/tensor.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

using namespace tmcg;

namespace {

// Reference contraction: explicit loops over all index tuples, no layout tricks.
Tensor contract_loops(const Tensor& a, const Tensor& b,
                      const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<index_t> a_con, b_con, a_free, b_free;
  for (const auto& [la, lb] : pairs) {
    a_con.push_back(a.leg_pos(la));
    b_con.push_back(b.leg_pos(lb));
  }
  for (index_t i = 0; i < a.rank(); ++i)
    if (std::find(a_con.begin(), a_con.end(), i) == a_con.end()) a_free.push_back(i);
  for (index_t i = 0; i < b.rank(); ++i)
    if (std::find(b_con.begin(), b_con.end(), i) == b_con.end()) b_free.push_back(i);

  std::vector<std::string> legs;
  std::vector<index_t> dims;
  for (index_t i : a_free) { legs.push_back(a.legs()[i]); dims.push_back(a.dims()[i]); }
  for (index_t i : b_free) { legs.push_back(b.legs()[i]); dims.push_back(b.dims()[i]); }
  Tensor out = Tensor::zeros(legs, dims);

  std::vector<index_t> ia(a.rank(), 0), ib(b.rank(), 0), io(out.rank(), 0);
  index_t csize = 1;
  std::vector<index_t> cdims;
  for (size_t k = 0; k < a_con.size(); ++k) {
    cdims.push_back(a.dims()[a_con[k]]);
    csize *= a.dims()[a_con[k]];
  }
  index_t osize = out.size();
  for (index_t flat = 0; flat < osize; ++flat) {
    index_t rem = flat;
    for (index_t i = out.rank() - 1; i >= 0; --i) {
      io[i] = rem % out.dims()[i];
      rem /= out.dims()[i];
    }
    for (size_t k = 0; k < a_free.size(); ++k) ia[a_free[k]] = io[k];
    for (size_t k = 0; k < b_free.size(); ++k) ib[b_free[k]] = io[a_free.size() + k];
    cplx acc = 0.0;
    for (index_t c = 0; c < csize; ++c) {
      index_t crem = c;
      for (index_t k = static_cast<index_t>(cdims.size()) - 1; k >= 0; --k) {
        index_t v = crem % cdims[k];
        crem /= cdims[k];
        ia[a_con[k]] = v;
        ib[b_con[k]] = v;
      }
      acc += a.at(ia) * b.at(ib);
    }
    out.data()[flat] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("tensor element access follows row-major layout") {
  Tensor t = Tensor::zeros({"a", "b", "c"}, {2, 3, 4});
  // Last leg fastest: flat index of (i,j,k) is (i*3 + j)*4 + k.
  t.at({1, 2, 3}) = cplx(7.0, -1.0);
  CHECK(t.data()[(1 * 3 + 2) * 4 + 3] == cplx(7.0, -1.0));
  CHECK(t.size() == 24);
  CHECK(t.dim("b") == 3);
  CHECK(t.leg_pos("c") == 2);
  CHECK(t.leg_pos("zz") == -1);
}

TEST_CASE("identity tensor is the Kronecker delta") {
  Tensor id = Tensor::identity(3, "r", "c");
  for (index_t i = 0; i < 3; ++i)
    for (index_t j = 0; j < 3; ++j)
      CHECK(id.at({i, j}) == cplx(i == j ? 1.0 : 0.0, 0.0));
}

TEST_CASE("permute moves data consistently with leg order") {
  Tensor t = random_gaussian({"a", "b", "c"}, {2, 3, 4}, 42);
  Tensor p = t.permuted({"c", "a", "b"});
  REQUIRE(p.dims() == std::vector<index_t>{4, 2, 3});
  for (index_t i = 0; i < 2; ++i)
    for (index_t j = 0; j < 3; ++j)
      for (index_t k = 0; k < 4; ++k)
        CHECK(p.at({k, i, j}) == t.at({i, j, k}));
  // Round trip restores the original.
  Tensor back = p.permuted({"a", "b", "c"});
  for (index_t i = 0; i < t.size(); ++i) CHECK(back.data()[i] == t.data()[i]);
}

TEST_CASE("rename changes labels but not data") {
  Tensor t = random_gaussian({"a", "b"}, {2, 2}, 5);
  Tensor r = t.renamed("a", "x");
  CHECK(r.legs() == std::vector<std::string>{"x", "b"});
  for (index_t i = 0; i < t.size(); ++i) CHECK(r.data()[i] == t.data()[i]);
  Tensor r2 = t.renamed({{"a", "p"}, {"b", "q"}});
  CHECK(r2.legs() == std::vector<std::string>{"p", "q"});
}

TEST_CASE("contract matches explicit loop reference on random tensors") {
  Tensor a = random_gaussian({"i", "j", "k"}, {3, 4, 2}, 1);
  Tensor b = random_gaussian({"p", "q", "r"}, {4, 2, 5}, 2);
  Tensor got = contract(a, b, {{"j", "p"}, {"k", "q"}});
  Tensor want = contract_loops(a, b, {{"j", "p"}, {"k", "q"}});
  REQUIRE(got.legs() == std::vector<std::string>{"i", "r"});
  REQUIRE(got.dims() == want.dims());
  for (index_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got.data()[i] - want.data()[i]) < 1e-12);
}

TEST_CASE("contract with reordered pairs matches the loop reference") {
  Tensor a = random_gaussian({"i", "j", "k", "l"}, {2, 3, 2, 3}, 10);
  Tensor b = random_gaussian({"m", "n", "o"}, {3, 2, 3}, 11);
  // Contract in a scrambled order to exercise the permutation logic.
  auto pairs = std::vector<std::pair<std::string, std::string>>{
      {"l", "m"}, {"j", "o"}};
  Tensor got = contract(a, b, pairs);
  Tensor want = contract_loops(a, b, pairs);
  REQUIRE(got.legs() == want.legs());
  for (index_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got.data()[i] - want.data()[i]) < 1e-12);
}

TEST_CASE("contract with no contracted legs is an outer product") {
  Tensor a = random_gaussian({"i"}, {2}, 3);
  Tensor b = random_gaussian({"j"}, {3}, 4);
  Tensor got = contract(a, b, {});
  for (index_t i = 0; i < 2; ++i)
    for (index_t j = 0; j < 3; ++j)
      CHECK(std::abs(got.at({i, j}) - a.at({i}) * b.at({j})) < 1e-14);
}

TEST_CASE("full contraction yields a scalar tensor") {
  Tensor a = random_gaussian({"i", "j"}, {3, 3}, 5);
  Tensor b = random_gaussian({"i", "j"}, {3, 3}, 6);
  Tensor got = contract(a, b, {{"i", "i"}, {"j", "j"}});
  REQUIRE(got.rank() == 0);
  REQUIRE(got.size() == 1);
  cplx want = 0.0;
  for (index_t i = 0; i < 9; ++i) want += a.data()[i] * b.data()[i];
  CHECK(std::abs(got.data()[0] - want) < 1e-12);
}

TEST_CASE("trace_legs sums matching diagonal entries") {
  Tensor a = random_gaussian({"i", "j", "k"}, {3, 2, 3}, 7);
  Tensor tr = trace_legs(a, "i", "k");
  REQUIRE(tr.legs() == std::vector<std::string>{"j"});
  for (index_t j = 0; j < 2; ++j) {
    cplx want = 0.0;
    for (index_t i = 0; i < 3; ++i) want += a.at({i, j, i});
    CHECK(std::abs(tr.at({j}) - want) < 1e-13);
  }
}

TEST_CASE("merge and split are mutually inverse") {
  Tensor t = random_gaussian({"a", "b", "c", "d"}, {2, 3, 4, 2}, 8);
  Tensor m = merge_legs(t, {"b", "c"}, "bc");
  REQUIRE(m.legs() == std::vector<std::string>{"a", "bc", "d"});
  REQUIRE(m.dims() == std::vector<index_t>{2, 12, 2});
  Tensor s = split_leg(m, "bc", {"b", "c"}, {3, 4});
  Tensor sp = s.permuted({"a", "b", "c", "d"});
  for (index_t i = 0; i < t.size(); ++i)
    CHECK(sp.data()[i] == t.data()[i]);
  // Merged index runs row-major over the group: (b, c) -> b*4 + c.
  CHECK(m.at({1, 2 * 4 + 3, 0}) == t.at({1, 2, 3, 0}));
}

TEST_CASE("as_matrix and from_matrix round trip") {
  Tensor t = random_gaussian({"a", "b", "c"}, {2, 3, 4}, 9);
  // Rows = {b}, columns = remaining legs in current order = {a, c}.
  Eigen::MatrixXcd m = as_matrix(t, {"b"});
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 8);
  CHECK(std::abs(m(2, 1 * 4 + 3) - t.at({1, 2, 3})) < 1e-15);
  Tensor back = from_matrix(m, {"b"}, {3}, {"a", "c"}, {2, 4});
  Tensor bp = back.permuted({"a", "b", "c"});
  for (index_t i = 0; i < t.size(); ++i) CHECK(bp.data()[i] == t.data()[i]);
}

TEST_CASE("svd_split reconstructs and exposes exact singular values") {
  // diag(3, 1) as a 2x2 tensor: singular values {3, 1}.
  Tensor t = Tensor::zeros({"i", "j"}, {2, 2});
  t.at({0, 0}) = 3.0;
  t.at({1, 1}) = 1.0;

  SUBCASE("untruncated factorization is exact") {
    SvdResult r = svd_split(t, {"i"});
    REQUIRE(r.s.size() == 2);
    CHECK(r.s[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.s[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.discarded_weight == doctest::Approx(0.0));
    // u diag(s) vh reproduces t.
    Tensor us = r.u;
    Eigen::MatrixXcd um = as_matrix(us, {"i"});
    for (index_t i = 0; i < um.rows(); ++i)
      for (index_t k = 0; k < um.cols(); ++k)
        um(i, k) *= r.s[static_cast<size_t>(k)];
    us = from_matrix(um, {"i"}, {2}, {"svd"}, {2});
    Tensor rec = contract(us, r.vh, {{"svd", "svd"}});
    for (index_t i = 0; i < 2; ++i)
      for (index_t j = 0; j < 2; ++j)
        CHECK(std::abs(rec.at({i, j}) - t.at({i, j})) < 1e-13);
  }

  SUBCASE("truncation to one value reports relative discarded weight") {
    SvdOptions opt;
    opt.max_dim = 1;
    SvdResult r = svd_split(t, {"i"}, opt);
    REQUIRE(r.s.size() == 1);
    CHECK(r.s[0] == doctest::Approx(3.0).epsilon(1e-14));
    // Discarded weight is sum of dropped s^2 over total: 1 / (9 + 1).
    CHECK(r.discarded_weight == doctest::Approx(0.1).epsilon(1e-13));
  }
}

TEST_CASE("svd_split reconstructs a random complex tensor") {
  // Complex input exercises the phase convention: the same rotation must be
  // applied to both factors so it cancels in u * s * vh.
  Tensor t = random_gaussian({"x", "y"}, {4, 5}, 99);
  SvdOptions opt;
  opt.bond = "s";
  SvdResult r = svd_split(t, {"x"}, opt);
  Eigen::MatrixXcd um = as_matrix(r.u.permuted({"x", "s"}), {"x"});
  for (index_t c = 0; c < um.cols(); ++c) um.col(c) *= r.s[static_cast<size_t>(c)];
  Tensor us = from_matrix(um, {"x"}, {4}, {"s"}, {um.cols()});
  Tensor rec = contract(us, r.vh, {{"s", "s"}});
  for (index_t i = 0; i < 4; ++i)
    for (index_t j = 0; j < 5; ++j)
      CHECK(std::abs(rec.at({i, j}) - t.at({i, j})) < 1e-12);
}

TEST_CASE("svd_split u is an isometry and phases are deterministic") {
  Tensor t = random_gaussian({"a", "b", "c"}, {3, 2, 4}, 11);
  SvdOptions opt;
  opt.bond = "m";
  SvdResult r = svd_split(t, {"a", "b"}, opt);
  // u^dagger u = identity on the new bond.
  Eigen::MatrixXcd um = as_matrix(r.u.permuted({"a", "b", "m"}), {"a", "b"});
  Eigen::MatrixXcd gram = um.adjoint() * um;
  CHECK((gram - Eigen::MatrixXcd::Identity(gram.rows(), gram.cols())).norm() < 1e-12);
  // Phase convention: largest-modulus entry of each u column is real positive.
  for (index_t c = 0; c < um.cols(); ++c) {
    index_t arg = 0;
    for (index_t rr = 1; rr < um.rows(); ++rr)
      if (std::abs(um(rr, c)) > std::abs(um(arg, c))) arg = rr;
    CHECK(um(arg, c).imag() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(um(arg, c).real() > 0.0);
  }
  // Running the same decomposition twice gives bitwise identical factors.
  SvdResult r2 = svd_split(t, {"a", "b"}, opt);
  for (index_t i = 0; i < r.u.size(); ++i) CHECK(r.u.data()[i] == r2.u.data()[i]);
  for (index_t i = 0; i < r.vh.size(); ++i) CHECK(r.vh.data()[i] == r2.vh.data()[i]);
}

TEST_CASE("svd_split keeps degenerate multiplets together") {
  // Singular values {2, 1, 1}: a cut at max_dim=2 would split the pair,
  // so the truncation must keep all three and warn, or cut below.
  Tensor t = Tensor::zeros({"i", "j"}, {3, 3});
  t.at({0, 0}) = 2.0;
  t.at({1, 1}) = 1.0;
  t.at({2, 2}) = 1.0;
  SvdOptions opt;
  opt.max_dim = 2;
  SvdResult r = svd_split(t, {"i"}, opt);
  // The degenerate pair straddles the cut; policy keeps the full multiplet
  // when it fits within max_dim + multiplet size.
  CHECK(r.s.size() == 3);
  CHECK(r.degeneracy_warning);
}

TEST_CASE("eig_dominant matches dense eigensolver on a random matrix") {
  const index_t n = 24;
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(n, n);
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng)) / std::sqrt(double(n));
  // Shift to make the dominant eigenvalue well separated.
  m += 3.0 * Eigen::MatrixXcd::Identity(n, n);

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m);
  index_t arg = 0;
  for (index_t i = 1; i < n; ++i)
    if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(arg))) arg = i;
  cplx want = es.eigenvalues()(arg);

  EigResult r = eig_dominant(m);
  CHECK(r.converged);
  CHECK(std::abs(r.value - want) < 1e-10 * std::abs(want));
  // Vector satisfies the eigen equation.
  CHECK((m * r.vector - r.value * r.vector).norm() < 1e-9);
  // Phase fixed: largest-modulus component real positive.
  index_t va = 0;
  for (index_t i = 1; i < n; ++i)
    if (std::abs(r.vector(i)) > std::abs(r.vector(va))) va = i;
  CHECK(r.vector(va).imag() == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(r.vector(va).real() > 0.0);
}

TEST_CASE("eig_dominant works through the matrix-free interface") {
  // Averaging map: ones(4)/4 has dominant eigenvalue 1 with uniform vector.
  const index_t n = 4;
  auto apply = [n](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    cplx s = x.sum() / double(n);
    return Eigen::VectorXcd::Constant(n, s);
  };
  EigResult r = eig_dominant(apply, n);
  CHECK(r.converged);
  CHECK(std::abs(r.value - 1.0) < 1e-11);
  for (index_t i = 0; i < n; ++i) CHECK(std::abs(r.vector(i) - 0.5) < 1e-10);
}

TEST_CASE("eig_dominant warm start converges and stays deterministic") {
  const index_t n = 12;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (index_t i = 0; i < n; ++i) m(i, i) = 1.0 / double(i + 1);
  EigOptions o;
  o.v0 = Eigen::VectorXcd::Constant(n, cplx(1.0, 0.3));
  EigResult r = eig_dominant(m, o);
  CHECK(r.converged);
  CHECK(std::abs(r.value - 1.0) < 1e-12);
}

TEST_CASE("eig_all_hermitian returns descending spectrum and rejects non-hermitian input") {
  Eigen::MatrixXcd h(3, 3);
  h << cplx(2.0, 0.0), cplx(0, 1), cplx(0.0, 0.0),
       cplx(0, -1), cplx(1.0, 0.0), cplx(0.5, 0.0),
       cplx(0.0, 0.0), cplx(0.5, 0.0), cplx(-1.0, 0.0);
  HermEigResult r = eig_all_hermitian(h);
  REQUIRE(r.values.size() == 3);
  CHECK(r.values(0) >= r.values(1));
  CHECK(r.values(1) >= r.values(2));
  CHECK(r.values.sum() == doctest::Approx(2.0).epsilon(1e-12));
  for (index_t k = 0; k < 3; ++k) {
    Eigen::VectorXcd v = r.vectors.col(k);
    CHECK((h * v - r.values(k) * v).norm() < 1e-12);
  }

  Eigen::MatrixXcd bad = h;
  bad(0, 1) += 1.0;
  CHECK_THROWS_AS(eig_all_hermitian(bad), Error);
}

TEST_CASE("random_gaussian is reproducible by seed") {
  Tensor a = random_gaussian({"x"}, {16}, 77);
  Tensor b = random_gaussian({"x"}, {16}, 77);
  Tensor c = random_gaussian({"x"}, {16}, 78);
  bool same = true, diff = false;
  for (index_t i = 0; i < 16; ++i) {
    same = same && (a.data()[i] == b.data()[i]);
    diff = diff || (a.data()[i] != c.data()[i]);
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("norm and scalar arithmetic behave") {
  Tensor t = Tensor::zeros({"i"}, {2});
  t.at({0}) = cplx(3.0, 0.0);
  t.at({1}) = cplx(0.0, 4.0);
  CHECK(t.norm() == doctest::Approx(5.0));
  CHECK(t.max_abs() == doctest::Approx(4.0));
  t *= cplx(2.0, 0.0);
  CHECK(t.norm() == doctest::Approx(10.0));
  Tensor u = t + t;
  CHECK(u.norm() == doctest::Approx(20.0));
  Tensor w = u - t;
  CHECK(w.norm() == doctest::Approx(10.0));
}

TEST_CASE("addition accepts a permuted operand") {
  Tensor a = random_gaussian({"x", "y"}, {2, 3}, 21);
  Tensor b = a.permuted({"y", "x"});
  Tensor s = a + b;  // must align legs before adding
  for (index_t i = 0; i < 2; ++i)
    for (index_t j = 0; j < 3; ++j)
      CHECK(std::abs(s.at({i, j}) - 2.0 * a.at({i, j})) < 1e-14);
}
