#pragma once

// Uniform (translation-invariant) matrix product states: transfer maps and
// fixed points, canonical forms, Schmidt and transfer spectra, correlators,
// energy evaluation, canonical bond truncation, and an imaginary-time
// baseline ground-state optimizer.
//
// Conventions. The site tensor A carries legs (l, p, r). The transfer map
// acts on bond-space vectors x with legs (k, b): k contracts ket-side bond
// indices, b the bra side. Right action y = T x sums A x conj(A) over (p, r);
// left action y = x T sums over (p, l). The pairing (x|y) = sum x[k,b] y[k,b]
// carries no extra conjugation: environment tensors already contain the bra
// factors. Fixed points l, r are Hermitian PSD as (k, b) matrices after
// normalize, scaled so Tr r = 1 and (l|r) = 1.

#include <tmcg/models.hpp>
#include <tmcg/tensor.hpp>

#include <optional>
#include <vector>

namespace tmcg {

enum class Canonical { none, left, right };

struct UniformMps {
  Tensor a;  // legs (l, p, r)
  Canonical canonical = Canonical::none;
  std::optional<Tensor> l, r;   // cached fixed points, legs (k, b)
  double norm_factor = 1.0;     // dominant transfer eigenvalue removed by normalize

  index_t bond_dim() const { return a.dim("l"); }
  index_t phys_dim() const { return a.dim("p"); }
  bool has_fixed_points() const { return l.has_value() && r.has_value(); }
};

// Matrix-free transfer applications. op carries legs (o, i): o contracts the
// bra physical index, i the ket one, so op = identity reduces to the plain map.
Tensor transfer_right(const Tensor& a, const Tensor& x);
Tensor transfer_left(const Tensor& a, const Tensor& x);
Tensor transfer_right_op(const Tensor& a, const Tensor& op, const Tensor& x);
Tensor transfer_left_op(const Tensor& a, const Tensor& op, const Tensor& x);
// Mixed maps with distinct ket and bra tensors (excitation overlaps).
Tensor mixed_transfer_right(const Tensor& ket, const Tensor& bra, const Tensor& x);
Tensor mixed_transfer_left(const Tensor& ket, const Tensor& bra, const Tensor& x);

cplx pair_lr(const Tensor& lx, const Tensor& rx);

// Materialized D^2 x D^2 transfer matrix, rows and columns indexed by (k, b)
// merged row-major. Row (l, l'), column (r, r'): sum_p A[l,p,r] conj A[l',p,r'].
Eigen::MatrixXcd transfer_matrix(const Tensor& a);

// Rescales a by the dominant transfer eigenvalue (must be positive real up to
// tolerance; throws otherwise) and caches Hermitian PSD fixed points with
// Tr r = 1, (l|r) = 1. Warns through the sink on a small eigenvalue gap
// (near-degenerate dominant value, non-injective state).
UniformMps normalize_and_fixed_points(UniformMps m, const EigOptions& opts = {});

struct CanonicalResult {
  UniformMps state;       // canonical flag set; fixed points cached
  Tensor gauge;           // legs (new, old): A_c = gauge A gauge_inv
  Tensor gauge_inv;       // legs (old, new)
};
CanonicalResult left_canonicalize(const UniformMps& m);
CanonicalResult right_canonicalize(const UniformMps& m);

// Descending, normalized so the squares sum to 1; gauge invariant.
std::vector<double> schmidt_spectrum(const UniformMps& m);

struct TmSpectrum {
  std::vector<cplx> values;  // modulus descending, values[0] = 1 after normalize
};
// Top-n transfer eigenvalues. Materializes the transfer matrix (D <= 64).
TmSpectrum tm_spectrum(const UniformMps& m, index_t n);

// (l| T^o1 T^(n-1) T^o2 |r) for operator separation n >= 1.
cplx static_correlator(const UniformMps& m, const Tensor& o1, const Tensor& o2, index_t n);

// (l| two-site insertion of h |r); h legs (o1, o2, i1, i2). Imaginary part
// beyond 1e-8 triggers a warning; the real part is returned.
double energy_density(const UniformMps& m, const Tensor& h);

struct TruncationResult {
  UniformMps state;            // renormalized, fixed points cached
  double truncation_err = 0.0; // discarded Schmidt weight, sum of dropped s^2 over total
  Tensor w;                    // legs (big, small): isometric embedding of the kept space
  Tensor w_inv;                // legs (small, big): w_inv w = identity exactly
  std::vector<double> schmidt; // kept values, renormalized
};
// Canonical truncation to bond dimension at most max_dim: gauges to the
// Schmidt basis and keeps the dominant block. A degenerate multiplet at the
// cut is kept whole (svd_split policy).
TruncationResult truncate(const UniformMps& m, index_t max_dim,
                          const SvdOptions& opts = {});

// MPO application: site legs (o, i, l, r); new bonds merge (mpo, mps)
// row-major with the mpo bond slowest. Invalidates cached fixed points.
UniformMps apply_mpo(const UniformMps& m, const Tensor& site);

struct BaselineOptions {
  double tol = 1e-10;          // energy change per step, final stage
  double anneal_start = 0.1;   // initial Trotter step, halved per stage
  int max_steps = 20000;       // total across stages
  int max_stage_steps = 4000;
};
struct BaselineResult {
  UniformMps state;            // left-canonical
  double energy = 0.0;
  int steps = 0;
  bool converged = false;
};
// Imaginary-time evolution with the one-row MPO and per-step canonical
// truncation, annealing the Trotter step from anneal_start down to
// params.delta. Converges on the energy density.
BaselineResult baseline_ground_state(const IsingParams& params, index_t D,
                                     const BaselineOptions& opts = {});

}  // namespace tmcg
