#pragma once

// Layered isometric coarse-graining of a translation invariant MPO chain.
//
// MPO site tensors use the column convention of models.hpp: legs (o, i, l, r)
// with operator legs o/i of dimension d and chain bonds l/r of dimension D.
// A coarse-graining gate is a five-leg tensor g(i1, i2, vi, o, vo): it
// consumes two adjacent operator legs, carries virtual legs vi/vo of
// dimension chi along the chain, and emits one coarse operator leg of
// dimension dp. Blocking two MPO sites between g (on the o side) and conj(g)
// (on the i side) yields a coarse site whose composite bonds merge
// (gate virtual, MPO bond, conj-gate virtual) in that order, ket slowest.

#include <cstdint>
#include <vector>

#include "tmcg/models.hpp"
#include "tmcg/stiefel.hpp"
#include "tmcg/tensor.hpp"

namespace tmcg {

// Which grouping of the gate is isometric. With gauge left the map
// (i1, i2, vi) -> (o, vo) is an isometry, so G^dag G telescopes to the
// identity starting from the left chain end; gauge right groups
// (i1, i2, vo) -> (o, vi) and telescopes from the right.
enum class GateGauge { left, right };

struct IsoGate {
  Tensor g;  // legs (i1, i2, vi, o, vo)
  GateGauge gauge = GateGauge::left;
  index_t d = 0, chi = 0, dp = 0;
};

// Frobenius distance of the gauge's grouping from an exact isometry.
double gate_isometry_defect(const IsoGate& gate);

// Wraps a five-leg tensor; throws if legs are missing, dp > d^2, or the
// isometry defect exceeds 1e-10.
IsoGate make_gate(const Tensor& g, GateGauge gauge);

// Matrix of the gauge's isometric grouping (rows d^2 chi, cols dp chi) and
// the inverse reshaping.
Eigen::MatrixXcd gate_matrix(const IsoGate& gate);
IsoGate gate_from_matrix(const Eigen::MatrixXcd& m, index_t d, index_t chi,
                         index_t dp, GateGauge gauge);

// Exact identity-block embedding: the first dp*chi basis states of
// (i1, i2, vi) pass through unchanged. Unitary when dp = d^2.
IsoGate identity_block_gate(index_t d, index_t chi, index_t dp, GateGauge gauge);

// Identity-block embedding perturbed at scale 1e-2 and re-projected onto the
// manifold; seed controls the perturbation.
IsoGate initial_gate(index_t d, index_t chi, index_t dp, GateGauge gauge,
                     std::uint64_t seed);

// Gate assembled from a binary-MERA pair:
//   g[i1, i2, vi, o, vo] = sum_a u[a, vo, i1, i2] * w[o, vi, a].
// u legs (a, vo, i1, i2) must be unitary as a map (i1, i2) -> (a, vo); w legs
// (o, vi, a) must have orthonormal rows as a map (vi, a) -> o. The disentangler
// output crossing the gate boundary fixes chi = dim(a). Result is isometric in
// the left gauge.
IsoGate gate_from_mera_pair(const Tensor& u, const Tensor& w);

// Two MPO sites sandwiched between the gate and its conjugate. Legs
// (o, i, l, r): o/i of dimension dp, l/r composite of dimension chi^2 D.
Tensor blocked_site(const Tensor& o_prev, const IsoGate& gate);

// Blocked site with the coarse operator legs traced, as a dense matrix on the
// composite bond space (row = left bond).
Eigen::MatrixXcd generalized_tm(const Tensor& o_prev, const IsoGate& gate);

struct SigmaPair {
  Tensor sigma_l;  // legs (k, m, b): gate virtual ket, MPO bond, conj virtual
  Tensor sigma_r;
  cplx value{0.0, 0.0};   // dominant eigenvalue of the generalized TM
  double gap_ratio = 0.0; // |lambda_2| / |lambda_1| estimate
};

// Dominant left/right fixed points of the generalized transfer matrix,
// normalized so (sigma_l | sigma_r) = 1 under the plain bilinear pairing.
SigmaPair tm_fixed_points(const Tensor& o_prev, const IsoGate& gate,
                          const SigmaPair* warm = nullptr);

// Environment of conj(g) in the cost network: d cost / d conj(g), as a tensor
// with the gate's legs. cost = sum env * conj(g).
Tensor gate_cost_env(const Tensor& o_prev, const IsoGate& gate, const SigmaPair& sig);

// (sigma_l | generalized_tm | sigma_r); warns when the imaginary part exceeds
// 1e-10 relative (Hermiticity violation of the input MPO).
double gate_cost(const Tensor& o_prev, const IsoGate& gate, const SigmaPair& sig);

struct OptimizeOptions {
  double cg_tol = 1e-9;  // relative cost change across fixed-point updates
  int max_outer = 400;   // fixed-point recomputations
  int inner_steps = 10;  // CG steps between fixed-point updates
  int restarts = 1;      // > 1 keeps the best of independently seeded runs
  std::uint64_t seed = 1;
  const IsoGate* init = nullptr;  // warm start replacing the canonical initial gate
};

struct OptimizeResult {
  IsoGate gate;
  SigmaPair sigma;
  double cost = 0.0;
  int outer_iterations = 0;
  bool converged = false;
};

// Alternates Riemannian CG on the gate (fixed points frozen) with fixed-point
// recomputation until the cost settles. A refresh that decreases the cost
// means the frozen-sigma model was pushed past its validity; the step is
// logged through the warning sink, rejected, and retried with a smaller
// inner budget, so the accepted cost sequence is monotone nondecreasing.
// When dp = d^2 every gate is unitary and the cost is gate-independent, so
// the canonical identity-block reshape is returned without optimization.
OptimizeResult optimize_gate(const Tensor& o_prev, index_t chi, index_t dp,
                             GateGauge gauge, const OptimizeOptions& opts = {});

struct CoarseStep {
  Tensor o_coarse;  // legs (o, i, l, r), bond <= max_bond
  Tensor w;         // rank reducer, legs (big, small)
  Tensor w_inv;     // left inverse, legs (small, big); w_inv * w = 1
  double truncation_err = 0.0;
  double log_scale = 0.0;  // per-site factor divided out of o_coarse
};

// Truncates the blocked site's composite bond with the canonical fixed-point
// gauge (same construction as umps::truncate, applied to the MPO chain with
// o/i merged into one physical leg). Warns when the discarded weight exceeds
// 1e-3. The coarse tensor is rescaled so its operator-traced transfer matrix
// has unit dominant eigenvalue; without this the entries grow like
// exp(c * 2^s) across layers and overflow. log_scale records the removed
// factor's natural log.
CoarseStep coarse_step(const Tensor& o_prev, const IsoGate& gate, index_t max_bond,
                       double trunc_tol = 0.0);

struct LayerDims {
  index_t chi = 2, dp = 2, bond = 4;
  double cg_tol = 1e-9;
  double trunc_tol = 1e-12;
};

struct Schedule {
  std::vector<LayerDims> layers;
  GateGauge gauge = GateGauge::left;
  OptimizeOptions opt;  // cg_tol is overridden per layer
};

// chi = 2, dp = 2, bond capped at 4 on every layer. Keeping dp = d is what
// makes the optimization meaningful: at dp = d * d the gate is unitary and
// the cost is gate-independent, so nothing steers the virtual legs and the
// blocked chain keeps passive pass-through wires whose flat transfer
// spectrum breaks the canonical truncation.
Schedule default_schedule(index_t s_max);

struct IsoLayer {
  IsoGate gate;
  Tensor o_prev;           // the MPO site this layer consumed (layer 1: the input column)
  Tensor o_coarse;         // coarse MPO site after bond truncation, rescaled
  Tensor w, w_inv;         // rank reducer pair on the composite bond
  Tensor sigma_l, sigma_r; // fixed points of the layer's generalized TM
  double cost_final = 0.0;
  double truncation_err = 0.0;
  double log_scale = 0.0;  // per-site factor divided out of o_coarse
  double tm_gap = 0.0;     // 1 - |lambda_2 / lambda_1| of the generalized TM
};

// Single bottom-up sweep: optimize a gate per layer, truncate, feed the
// coarse tensor to the next layer. Layer s consumes operator dimension
// dp_{s-1} (d = 2 at the bottom).
std::vector<IsoLayer> run_scheme(const TrotterMpo& o0, const Schedule& schedule);
std::vector<IsoLayer> run_scheme(const Tensor& o0_column, const Schedule& schedule);

}  // namespace tmcg
