#include "oracles.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace tmcg::oracle {

Eigen::MatrixXcd kron_chain(const std::vector<Eigen::MatrixXcd>& ops) {
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(1, 1);
  for (const auto& op : ops) acc = Eigen::kroneckerProduct(acc, op).eval();
  return acc;
}

Eigen::MatrixXcd embed(const Eigen::Matrix2cd& op, int k, int n) {
  std::vector<Eigen::MatrixXcd> ops;
  for (int i = 0; i < n; ++i)
    ops.push_back(i == k ? Eigen::MatrixXcd(op)
                         : Eigen::MatrixXcd(Eigen::Matrix2cd::Identity()));
  return kron_chain(ops);
}

Eigen::MatrixXcd dense_ising_hamiltonian(double lambda, int n) {
  const index_t dim = index_t(1) << n;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::Matrix2cd sx = pauli_x(), sz = pauli_z();
  for (int i = 0; i + 1 < n; ++i) h -= embed(sx, i, n) * embed(sx, i + 1, n);
  for (int i = 0; i < n; ++i) h -= lambda * embed(sz, i, n);
  return h;
}

Eigen::MatrixXcd dense_mpo_operator(const Tensor& site, const Tensor& left_boundary,
                                    const Tensor& right_boundary, int n) {
  // Running tensor with legs (O, I, r): the chain built so far.
  Tensor run = contract(left_boundary, site, {{"l", "l"}});  // (o, i, r)
  run = run.renamed({{"o", "O"}, {"i", "I"}});
  for (int k = 1; k < n; ++k) {
    Tensor next = contract(run, site, {{"r", "l"}});  // (O, I, o, i, r)
    next = merge_legs(next, {"O", "o"}, "O");
    next = merge_legs(next, {"I", "i"}, "I");
    run = next;
  }
  run = contract(run, right_boundary, {{"r", "r"}});
  return as_matrix(run, {"O"});
}

Eigen::MatrixXcd dense_trotter_splitting(const IsingParams& params, int n) {
  const index_t dim = index_t(1) << n;
  Eigen::Matrix2cd sx = pauli_x(), sz = pauli_z();
  Eigen::MatrixXcd field = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::MatrixXcd bond = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) field += embed(sz, i, n);
  for (int i = 0; i + 1 < n; ++i) bond += embed(sx, i, n) * embed(sx, i + 1, n);
  Eigen::MatrixXcd b = dense_expm(params.delta * bond);
  if (params.trotter_order == 2) {
    Eigen::MatrixXcd fh = dense_expm(0.5 * params.delta * params.lambda * field);
    return fh * b * fh;
  }
  Eigen::MatrixXcd f = dense_expm(params.delta * params.lambda * field);
  return b * f;
}

Eigen::MatrixXcd dense_expm(const Eigen::MatrixXcd& m) { return m.exp(); }

}  // namespace tmcg::oracle
