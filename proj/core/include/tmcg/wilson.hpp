#pragma once

// Inhomogeneous scale-direction MPO assembled from a coarse-graining layer
// stack, its infrared cap, sequential contraction to a uniform MPS site, and
// the layered decomposition of that state's transfer fixed points.
//
// Picture a single column of the Euclidean network: a semi-infinite MPO chain
// of identical sites with the physical leg dangling at the bottom. Blocking
// the chain pairwise under layer 1's gate and inserting the rank reducer pair
// W1 W1inv at every internal bond rewrites the column as one boundary block
// (the bottom pair, gated, with W1 on top) below a semi-infinite chain of
// coarse sites. The boundary block keeps the dangling gate virtual legs of
// the causal cone; everything above is again a uniform chain and the step
// repeats with layer 2. After s_max layers the column has become a finite
// MPO in the scale direction, one rung per layer, with the physical leg at
// the bottom, one ket-side and one bra-side cone leg of dimension chi_s per
// rung, and the top scale bond closed by the infrared cap.
//
// Rung content: rung 1 holds two copies of the input site, the layer-1 gate
// and its conjugate, and W1. Rung s > 1 holds one copy of the layer-(s-1)
// coarse site, the layer-s gate pair, and W_s; its lower scale legs consume
// the coarse operator pair and the bond emitted by the rung below.
//
// Top convention: the last layer's rank reducer is replaced by the dominant
// right fixed point sigma_r of its generalized transfer matrix, the optimal
// rank-1 reducer (sigma_l is the exact left inverse since (sigma_l|sigma_r)
// = 1). This closes the scale direction only: the chain sites above the cut
// collapse to scalar rows sandwiched between the sigma pair and factor out
// of the state. The top rung's coarse operator pair stays open; those legs
// carry the emergent spatial correlations of the state and are folded into
// the rung's cone legs, so they join the MPS bond like any cone leg. The
// rank-1 scale reduction is exact for gapped input and deliberately breaks
// critical correlations; a near-degenerate top fixed point is reported as
// the symptom.

#include <tmcg/coarse_grain.hpp>
#include <tmcg/umps.hpp>

#include <vector>

namespace tmcg {

// Rung legs. Scale runs upward, rung index 0 at the physical end.
//   rung 0:   (cl, p, cr, pu, qu, mu)
//   rung s>0: (cl, pd, md, qd, cr, pu, qu, mu)
// cl/cr: dangling cone legs (gate virtual, ket/bra side), dimension chi_s.
// pd/qd: coarse operator pair consumed from below (dimension dp of the rung
// below); md: chain bond from below. pu/qu/mu: same trio emitted upward.
// The top rung is closed: mu is contracted against the unit extent left by
// the sigma reducer and pu/qu are merged into cl/cr (cl slow, pu fast), so
// it has no upward legs and chis.back() = chi * dp.
struct WilsonMpo {
  std::vector<Tensor> rungs;
  Tensor cap;                  // leg (c): sigma_r of the top layer, merged (k, m, b)
  double cap_gap = 0.0;        // spectral gap 1 - |l2/l1| of the top generalized TM
  std::vector<index_t> chis;   // cone dimension per rung (top includes the pair)
  index_t phys = 0;            // physical dimension at the bottom
  GateGauge gauge = GateGauge::left;  // cone orientation inherited from the gates
};

// Rank-1 fixed-point direction of a coarse column tensor in the scale
// direction: the dominant right fixed point of the doubled chain transfer
// map (l, lb) -> (r, rb) of o_top, Hermitized, returns its dominant
// eigenvector as a vector on the chain bond (leg c). The power iteration
// starts from the uniform vector, so an exactly degenerate transfer map
// (identity-like column) returns the symmetric representative; the phase is
// fixed deterministically. A near-degenerate dominant eigenvalue is reported
// through the warning sink (critical-case symptom).
Tensor top_cap(const Tensor& o_top);

// Assembles rungs bottom-up from a run_scheme stack, reduces the top rung's
// scale bond to extent 1 with the top layer's sigma_r, and folds the rung's
// operator pair into its cone legs. Throws on leg or extent mismatches
// between consecutive layers.
WilsonMpo build_wilson(const std::vector<IsoLayer>& layers);

struct WilsonContraction {
  UniformMps mps;                  // the contracted site, normalized with cached fixed points
  // Kept-basis isometries from the sequential truncation, one per rung in
  // absorption order (top rung first). Legs (acc, cone, out): acc is the
  // running bond arriving from above (extent 1 at the top), cone the rung's
  // ket cone leg, out the truncated bond. The bra side reuses the conjugate
  // isometry, valid because the column MPO is Hermitian and both cone stacks
  // come from the same gates.
  std::vector<Tensor> embeds;
  std::vector<double> discarded;   // relative weight dropped per absorption step
  double total_discarded = 0.0;    // 1 - prod_s (1 - discarded[s])
};

// Contracts the rungs top-down into a single site tensor, truncating the
// running cone-stack bond to at most max_bond after each absorption with the
// degeneracy-aware svd rule; both bonds use the ket-side basis as above.
// Warns when the cumulative discarded weight exceeds 1e-2. The result site
// has the ket cone stack on l and the bra stack on r, so neighboring columns
// contract as a uniform MPS chain.
WilsonContraction contract_to_umps(const WilsonMpo& w, index_t max_bond);

// Layered fixed points of the contracted state's transfer matrix. The ket
// and bra copies of the column form a doubled scale-direction MPO acting on
// the cone-pair stack; its dominant fixed points are computed by power
// iteration with the iterate held as a scale-direction MPS (one site per
// rung, physical legs the cone pair) and recompressed to bond_cap by a
// bottom-up zip sweep after every application. The kept-basis isometries of
// the converged right sweep are the per-layer rank reducers x.
struct LayeredFixedPoint {
  // Per rung, bottom-up. Legs (d, c, cb, u): d the scale bond from below,
  // (c, cb) the ket/bra cone pair, u the kept bond. Isometric as maps
  // (d, c, cb) -> u, so x_inv is the conjugate with the same legs, paired
  // over (d, c, cb), and the condition number is 1 by construction.
  std::vector<Tensor> x, x_inv;
  Tensor rho_l, rho_r;   // fixed points mapped to the contracted bond, legs (k, b)
  cplx value_l{0.0, 0.0}, value_r{0.0, 0.0};  // dominant eigenvalue estimates
  double fidelity_l = 0.0, fidelity_r = 0.0;  // |overlap| with the direct fixed points
  int iterations_l = 0, iterations_r = 0;
  bool converged = false;
};

struct LayeredOptions {
  index_t bond_cap = 32;   // scale-MPS bond during the zip recompression
  double tol = 1e-11;      // 1 - |successive iterate overlap|
  int max_iter = 200;
};

LayeredFixedPoint layered_fixed_point(const WilsonMpo& w, const WilsonContraction& c,
                                      const LayeredOptions& opts = {});
// Convenience overload: builds the Wilson MPO and contracts it at max_bond.
LayeredFixedPoint layered_fixed_point(const std::vector<IsoLayer>& layers, index_t max_bond,
                                      const LayeredOptions& opts = {});

// Relative Frobenius distance between consecutive coarse tensors,
// distances[s] = |O_{s+2} - O_{s+1}| / |O_{s+1}|; a plateau of small values
// marks the scale-invariant regime. Gauge differences between layers make
// this an upper bound on the invariant distance.
std::vector<double> layer_distances(const std::vector<IsoLayer>& layers);

// Index of the layer minimizing the distance to its successor; warns when
// even the minimum exceeds the threshold (no scale-invariant plateau).
index_t pick_scale_invariant_layer(const std::vector<IsoLayer>& layers,
                                   double threshold = 1e-2);

// Spectrum of the one-scale descent map at a designated fixed-point layer.
// w_star is a bulk rung whose upper and lower scale extents agree; x_star is
// the layer's reducer from layered_fixed_point with matching d and u extents.
// The rung's scale-through channels are traced pairwise (pd-pu, qd-qu,
// md-mu), the closure is doubled against its conjugate to act on cone-pair
// operators, and the result is sandwiched between x_star and its adjoint:
//   F(rho)(u, ub) = sum conj(x(d, c, cb, u)) K(c, cb; c', cb') x(d', c', cb', ub) rho(d, d')
// Eigenvalues are returned descending by modulus and scaled so the dominant
// one is 1; the raw magnitude mixes with the per-layer rescaling convention
// and carries no invariant meaning.
std::vector<cplx> radial_superoperator(const Tensor& w_star, const Tensor& x_star);

}  // namespace tmcg
