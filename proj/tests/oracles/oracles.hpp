#pragma once

// Independent reference implementations used only by tests and the
// verification command: dense many-body operators built by explicit
// Kronecker products and exact matrix exponentials. Deliberately slow and
// simple; nothing here shares code paths with the library under test.

#include <tmcg/models.hpp>
#include <tmcg/tensor.hpp>

#include <Eigen/Dense>

#include <vector>

namespace tmcg::oracle {

// Kronecker product of a list, left factor slowest (site 1 = leftmost).
Eigen::MatrixXcd kron_chain(const std::vector<Eigen::MatrixXcd>& ops);

// op acting on site k (0-based) of an n-site chain of qubits.
Eigen::MatrixXcd embed(const Eigen::Matrix2cd& op, int k, int n);

// Open-chain TFIM Hamiltonian -sum sx sx - lambda sum sz on n sites.
Eigen::MatrixXcd dense_ising_hamiltonian(double lambda, int n);

// Dense n-site expansion of an MPO with site legs (o, i, l, r) and boundary
// vectors on legs (l) / (r). Row index merges o_1..o_n (site 1 slowest).
Eigen::MatrixXcd dense_mpo_operator(const Tensor& site, const Tensor& left_boundary,
                                    const Tensor& right_boundary, int n);

// Dense n-site Trotter splitting of e^{-delta H}: order 2 gives
// F^{1/2} B F^{1/2}, order 1 gives B F, with F the field factor
// exp(delta lambda sum sz) and B the bond factor exp(delta sum sx sx).
Eigen::MatrixXcd dense_trotter_splitting(const IsingParams& params, int n);

// exp(m) through full diagonalization (matrix exponential reference).
Eigen::MatrixXcd dense_expm(const Eigen::MatrixXcd& m);

}  // namespace tmcg::oracle
