#include <tmcg/models.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>

namespace tmcg {

void IsingParams::validate() const {
  if (!(lambda > 0.0)) throw Error("IsingParams: lambda must be positive");
  if (!(delta > 0.0) || !(delta < 1.0))
    throw Error("IsingParams: delta must lie in (0, 1)");
  if (trotter_order != 1 && trotter_order != 2)
    throw Error("IsingParams: trotter_order must be 1 or 2");
}

Eigen::Matrix2cd pauli_x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

Eigen::Matrix2cd pauli_y() {
  Eigen::Matrix2cd m;
  m << cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0);
  return m;
}

Eigen::Matrix2cd pauli_z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

Tensor ising_local_term(double lambda) {
  if (!(lambda > 0.0)) throw Error("ising_local_term: lambda must be positive");
  Eigen::Matrix2cd sx = pauli_x(), sz = pauli_z(), id = Eigen::Matrix2cd::Identity();
  Eigen::Matrix4cd h = -Eigen::Matrix4cd(Eigen::kroneckerProduct(sx, sx).eval())
      - 0.5 * lambda * Eigen::Matrix4cd(Eigen::kroneckerProduct(sz, id).eval())
      - 0.5 * lambda * Eigen::Matrix4cd(Eigen::kroneckerProduct(id, sz).eval());
  Tensor t = from_matrix(h, {"o1", "o2"}, {2, 2}, {"i1", "i2"}, {2, 2});
  return t;
}

TrotterMpo trotter_mpo(const IsingParams& params) {
  params.validate();
  const double d = params.delta, lam = params.lambda;
  const double f[2] = {std::cosh(d), std::sinh(d)};

  Eigen::Matrix2cd sx = pauli_x();
  Eigen::Matrix2cd pow_sx[2] = {Eigen::Matrix2cd::Identity(), sx};

  TrotterMpo mpo;
  mpo.params = params;
  mpo.hermitian = (params.trotter_order == 2);
  mpo.site = Tensor::zeros({"o", "i", "l", "r"}, {2, 2, 2, 2});
  for (index_t l = 0; l < 2; ++l) {
    for (index_t r = 0; r < 2; ++r) {
      Eigen::Matrix2cd core = std::sqrt(f[l] * f[r]) * pow_sx[(l + r) % 2];
      Eigen::Matrix2cd op;
      if (params.trotter_order == 2) {
        Eigen::Matrix2cd e = Eigen::Matrix2cd::Zero();
        e(0, 0) = std::exp(d * lam / 2.0);
        e(1, 1) = std::exp(-d * lam / 2.0);
        op = e * core * e;
      } else {
        Eigen::Matrix2cd fz = Eigen::Matrix2cd::Zero();
        fz(0, 0) = std::exp(d * lam);
        fz(1, 1) = std::exp(-d * lam);
        op = core * fz;
      }
      for (index_t o = 0; o < 2; ++o)
        for (index_t i = 0; i < 2; ++i) mpo.site.at({o, i, l, r}) = op(o, i);
    }
  }
  mpo.left_boundary = Tensor::zeros({"l"}, {2});
  mpo.left_boundary.at({0}) = 1.0 / std::sqrt(f[0]);
  mpo.right_boundary = mpo.left_boundary.renamed("l", "r");
  return mpo;
}

Tensor column_mpo_tensor(const TrotterMpo& mpo) {
  return mpo.site.renamed({{"l", "o"}, {"r", "i"}, {"i", "l"}, {"o", "r"}})
      .permuted({"o", "i", "l", "r"});
}

double exact_dispersion(double lambda, double p) {
  return 2.0 * std::sqrt(1.0 + lambda * lambda - 2.0 * lambda * std::cos(p));
}

double exact_energy_density(double lambda) {
  if (!(lambda > 0.0)) throw Error("exact_energy_density: lambda must be positive");
  // Even integrand: reduce to [0, pi], where the square root is smooth for
  // every lambda > 0 (at lambda = 1 it equals 2 sin(k/2) exactly).
  auto f = [lambda](double k) {
    return std::sqrt(1.0 + lambda * lambda - 2.0 * lambda * std::cos(k));
  };
  double err = 0.0;
  double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, 0.0, M_PI, 10, 1e-13, &err);
  if (err > 1e-11) warn("exact_energy_density: quadrature error estimate " + std::to_string(err));
  return -integral / M_PI;
}

}  // namespace tmcg
