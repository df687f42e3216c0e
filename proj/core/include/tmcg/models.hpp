#pragma once

// Transverse-field Ising model: local Hamiltonian terms, the bond-dimension-2
// MPO for one imaginary-time slice e^{-delta H}, and exact analytic results
// used as references throughout.

#include <tmcg/tensor.hpp>

namespace tmcg {

struct IsingParams {
  double lambda = 1.0;      // transverse field strength
  double delta = 0.001;     // imaginary-time step
  int trotter_order = 2;    // 1: bond * field; 2: symmetric field-bond-field
  // Throws Error on out-of-range values (lambda <= 0, delta outside (0, 1),
  // order not in {1, 2}).
  void validate() const;
};

Eigen::Matrix2cd pauli_x();
Eigen::Matrix2cd pauli_y();
Eigen::Matrix2cd pauli_z();

// Two-site bond term with the field split evenly between neighboring bonds:
//   h = -sx (x) sx - (lambda/2) (sz (x) 1 + 1 (x) sz).
// Legs (o1, o2, i1, i2), all dimension 2; summing h over bonds reproduces
// H = -sum sx sx - lambda sum sz up to boundary terms.
Tensor ising_local_term(double lambda);

// One row of the Euclidean network: e^{-delta H} after Trotter splitting,
// as a translation-invariant MPO with virtual bond dimension 2.
//
// Site tensor entries (derived from splitting each bond factor
// e^{delta sx sx} = sum_b f_b (sx)^b (x) (sx)^b, f_0 = cosh(delta),
// f_1 = sinh(delta), and absorbing sqrt(f) into each endpoint):
//   order 2:  O[l,r] = E sqrt(f_l f_r) (sx)^{l+r} E,   E = e^{(delta lambda / 2) sz}
//   order 1:  O[l,r] = sqrt(f_l f_r) (sx)^{l+r} F,     F = e^{delta lambda sz}
// (order 1 applies the full field factor after, i.e. operator-left of, the
// bond factor). Open-chain closures contract the end bonds with
// (1/sqrt(f_0), 0).
struct TrotterMpo {
  IsingParams params;
  Tensor site;              // legs (o, i, l, r): physical out/in, bonds left/right
  Tensor left_boundary;     // leg (l)
  Tensor right_boundary;    // leg (r)
  bool hermitian = false;   // the symmetric order-2 splitting is Hermitian
};

TrotterMpo trotter_mpo(const IsingParams& params);

// The same site tensor read along the imaginary-time (column) direction:
// operator legs of the column MPO are the old row bonds, chain bonds are the
// old physical legs. Returned legs (o, i, l, r) with o = old l, i = old r,
// l = old i (earlier time), r = old o (later time). The column operator is
// Hermitian positive for both Trotter orders (the site tensor is real and
// symmetric under both swaps).
Tensor column_mpo_tensor(const TrotterMpo& mpo);

// Ground state energy per site: -(1/2pi) Integral_{-pi}^{pi} dk e(k)/2 with
// e(k) the elementary dispersion below; adaptive quadrature, |error| <= 1e-12.
double exact_energy_density(double lambda);

// Elementary excitation energy e(p) = 2 sqrt(1 + lambda^2 - 2 lambda cos p).
double exact_dispersion(double lambda, double p);

}  // namespace tmcg
