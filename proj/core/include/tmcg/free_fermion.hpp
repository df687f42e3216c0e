#pragma once

// Exact Gaussian engine for the split-step Ising column. The column operator
// exp(k1 sum tz / 2) exp(k2 sum tx tx) exp(k1 sum tz / 2) on a chain of
// 2*l sites is quadratic in 4*l Majorana modes, so its spectrum, the
// correlation matrices of the states it generates, and any mode-isometry
// compression of those states are all computable to machine precision.
// The layered compression implemented here mirrors the interacting
// coarse-graining at equal geometry: tied SO(2p) rotations on p-site blocks,
// disentanglers offset by one site (the one-site overlap is the chi = 2
// crossing), and per-block selection of the q low-weight sites with the
// discarded modes traced out. Results serve as the reference the spin-path
// pipeline is checked against.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tmcg/tensor.hpp"

namespace tmcg {

// Dual couplings of the column operator, k = -log(tanh(x)) / 2. The bond
// step delta becomes the on-site Majorana pairing k1, the field step
// delta * lambda becomes the nearest-neighbour pairing k2; k2 <= k1 exactly
// when lambda >= 1.
struct FfCouplings {
  double k1 = 0;
  double k2 = 0;
};
FfCouplings build_couplings(double lambda, double delta);

// Single-particle content of the column operator on 2*l_sites sites. The
// operator acts as exp(-sum_m eps_m (n_m - 1/2)) up to a scalar; eps is
// ascending and the paired rows 2m, 2m+1 of modes hold the two Majorana
// vectors of mode m, so modes is orthogonal.
struct FfTransferMatrix {
  double k1 = 0;
  double k2 = 0;
  index_t l_sites = 0;
  std::vector<double> eps;
  Eigen::MatrixXd modes;
};
FfTransferMatrix diagonalize_tm(double k1, double k2, index_t l_sites);

// Majorana two-point functions <a_m a_n> = delta_mn + i gamma_mn. gamma is
// real antisymmetric with singular values in [0, 1]; pure states saturate
// gamma gamma^T = 1.
struct CorrMatrix {
  Eigen::MatrixXd gamma;
  index_t modes() const { return gamma.rows(); }
  Eigen::MatrixXcd dense() const;
};

// State of the column operator normalized as a density operator: each
// canonical pair carries weight tanh(eps/2).
CorrMatrix correlation_matrix(const FfTransferMatrix& tm);

// Dominant eigenvector of the column operator as a pure state: every
// canonical pair saturates at weight one.
CorrMatrix ground_state_corr(const FfTransferMatrix& tm);

// Canonical form of a real antisymmetric matrix: r^T g r is block diagonal
// with pairs [[0, -nu], [nu, 0]], nu descending and non-negative; columns
// 2m, 2m+1 of the orthogonal r span pair m. Near-zero clusters are realified
// jointly, so r stays orthogonal through degeneracies.
struct CanonicalPairs {
  std::vector<double> nu;
  Eigen::MatrixXd r;
};
CanonicalPairs canonical_pairs(const Eigen::MatrixXd& gamma);

// Energies of the (possibly compressed) column operator recovered from a
// thermal correlation matrix, eps = 2 artanh(nu), ascending. Weights outside
// [0, 1] by more than tol mean the matrix is not Gaussian-consistent.
std::vector<double> tm_spectrum_at_scale(const CorrMatrix& c, double tol = 1e-8);

// Momentum on the infinite lattice whose dispersion reproduces eps:
// cosh(eps) = cosh(2 k1) cosh(2 k2) - sinh(2 k1) sinh(2 k2) cos(momentum).
double dispersion_momentum(double k1, double k2, double eps);

// One coarse-graining layer: blocks of p_sites sites, a tied orthogonal
// block rotation w on 2p Majorana coordinates ahead of keeping the first
// 2*q_sites of them, and a tied orthogonal disentangler u across interior
// block boundaries, offset one site toward larger index. The cost is the
// summed canonical weight of the discarded coordinates, maximized so the
// traced modes are the frozen ones.
struct FfLayer {
  int p_sites = 0;
  int q_sites = 0;
  Eigen::MatrixXd u;
  Eigen::MatrixXd w;
  double cost = 0;
  int iterations = 0;
  bool converged = false;
};

struct FfOptimizeOptions {
  double tol = 1e-10;     // relative cost change across outer rounds
  int max_outer = 40;     // alternations of closed-form w and CG on u
  int inner_steps = 40;   // CG iterations on u per round
  int restarts = 1;       // > 1 keeps the best of independently seeded runs
  std::uint64_t seed = 1;
};

FfLayer optimize_ff_layer(const CorrMatrix& c, int p_sites, int q_sites,
                          const FfOptimizeOptions& opts = {});

// Applies a layer to the whole chain (blocks tiled from the left edge) and
// traces the discarded modes: the new gamma is the kept submatrix of the
// rotated one. Sites shrink by q/p.
CorrMatrix coarse_grain_corr(const CorrMatrix& c, const FfLayer& layer);

// Cone-restricted composition of a layer stack. The physical leg sits at the
// bond between sites l and l+1; every layer freezes the centre-adjacent site
// of each half as a crossing (the disentangler that would straddle the
// centre is omitted), tiles the rest of that half into blocks anchored at
// the centre, and freezes any partial outer block at the far edge. Columns
// of iso are the retained modes in the original chain basis; ket and bra
// halves never mix.
struct ImpurityMap {
  Eigen::MatrixXd iso;           // 4l x retained, orthonormal columns
  std::vector<int> layer_of;     // freezing layer, 1-based; 0 = still active
  std::vector<int> side_of;      // 0 = ket half, 1 = bra half
  std::vector<bool> crossing;    // centre-adjacent crossing modes
};
ImpurityMap impurity_isometry(index_t l_sites, const std::vector<FfLayer>& layers);

// Spectrum of the cone-compressed column operator. A mode is discrete when
// more than half of its weight sits on the crossing coordinates.
struct ImpurityMode {
  double eps = 0;
  double weight = 0;
  bool discrete = false;
};
std::vector<ImpurityMode> impurity_spectrum(const CorrMatrix& c0, const ImpurityMap& imp,
                                            double tol = 1e-8);

// Columns of iso belonging to one half, restricted to that half's rows.
Eigen::MatrixXd half_isometry(const ImpurityMap& imp, int side);

// Correlation matrix restricted to one half's retained columns.
CorrMatrix half_block(const CorrMatrix& c, const ImpurityMap& imp, int side);

// Half-chain entanglement content of a pure state: canonical weights nu of
// the half-restricted gamma give single-mode energies delta = artanh(nu),
// ascending (dominant first); Schmidt values are the normalized subset
// products of exp(-delta), descending, truncated to max_schmidt.
struct EntSpectrum {
  std::vector<double> delta;
  std::vector<double> schmidt;
};
EntSpectrum entanglement_spectrum_ff(const CorrMatrix& c_half, int max_schmidt = 64);

// Singular values (descending) of the overlap between the n_modes dominant
// entanglement modes of the uncompressed half chain and the retained
// half-chain modes of the compression. Values near one mean the dominant
// modes survive.
std::vector<double> svd_overlap(const CorrMatrix& c_ground, const ImpurityMap& imp,
                                int side, int n_modes);

// Full pipeline: diagonalize, then optimize and apply layers until s_max is
// reached or the chain no longer tiles. corr[s] is the correlation matrix
// after s layers.
struct FfRunResult {
  FfTransferMatrix tm;
  std::vector<FfLayer> layers;
  std::vector<CorrMatrix> corr;
};
FfRunResult run_ff_scheme(double lambda, double delta, index_t l_sites, int p_sites,
                          int q_sites, int s_max, const FfOptimizeOptions& opts = {});

}  // namespace tmcg
