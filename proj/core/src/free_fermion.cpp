#include "tmcg/free_fermion.hpp"

#include "tmcg/stiefel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace tmcg {

namespace {

// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
// zheevd is divide and conquer; the input is overwritten with eigenvectors.
void hermitian_eig(Eigen::MatrixXcd& a, Eigen::VectorXd& evals) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  evals.resize(n);
  if (n == 0) return;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, evals.data());
  if (info != 0) {
    std::ostringstream os;
    os << "hermitian eigensolver failed with info " << info;
    throw Error(os.str());
  }
}

// Nearest orthogonal matrix; applied when accumulated roundoff in the
// extracted mode pairs exceeds the tolerance used by downstream asserts.
void orthogonality_polish(Eigen::MatrixXd& o) {
  const double defect = (o * o.transpose() - Eigen::MatrixXd::Identity(o.rows(), o.cols()))
                            .cwiseAbs()
                            .maxCoeff();
  if (defect < 1e-11) return;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(o, Eigen::ComputeThinU | Eigen::ComputeThinV);
  o = svd.matrixU() * svd.matrixV().transpose();
}

// gamma of a state diagonal in the tm modes with pair weight nu_m: the pair
// block is [[0, -nu], [nu, 0]] in mode space, rotated back with O^T . O.
Eigen::MatrixXd corr_from_modes(const FfTransferMatrix& tm, const std::vector<double>& nu) {
  const index_t n = tm.modes.rows();
  const index_t half = n / 2;
  Eigen::MatrixXd x(half, n), y(half, n);
  for (index_t m = 0; m < half; ++m) {
    x.row(m) = tm.modes.row(2 * m);
    y.row(m) = nu[static_cast<std::size_t>(m)] * tm.modes.row(2 * m + 1);
  }
  Eigen::MatrixXd g = y.transpose() * x;
  g -= g.transpose().eval();
  return g;
}

}  // namespace

FfCouplings build_couplings(double lambda, double delta) {
  if (!(lambda > 0) || !(delta > 0)) throw Error("couplings need lambda > 0 and delta > 0");
  FfCouplings c;
  c.k1 = -0.5 * std::log(std::tanh(delta));
  c.k2 = -0.5 * std::log(std::tanh(delta * lambda));
  return c;
}

FfTransferMatrix diagonalize_tm(double k1, double k2, index_t l_sites) {
  if (l_sites < 1) throw Error("diagonalize_tm needs at least one site per half");
  if (!(k1 > 0) || k2 < 0) throw Error("diagonalize_tm needs k1 > 0 and k2 >= 0");
  const index_t sites = 2 * l_sites;
  const index_t n = 2 * sites;

  // Single-particle matrix of the column operator: the half field step acts
  // as cosh(k1) + sinh(k1) sy on each on-site pair, the bond step as
  // cosh(2 k2) + sinh(2 k2) sy across neighbouring sites. The palindromic
  // product is Hermitian positive with eigenvalues exp(+-eps).
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  const std::complex<double> mi(0.0, -1.0);
  const double c2 = std::cosh(2 * k2), s2 = std::sinh(2 * k2);
  for (index_t k = 0; k < sites; ++k) {
    m(2 * k, 2 * k) = 1.0;
    m(2 * k + 1, 2 * k + 1) = 1.0;
  }
  for (index_t k = 0; k + 1 < sites; ++k) {
    m(2 * k + 1, 2 * k + 1) = c2;
    m(2 * k + 2, 2 * k + 2) = c2;
    m(2 * k + 1, 2 * k + 2) = mi * s2;
    m(2 * k + 2, 2 * k + 1) = -mi * s2;
  }
  const double c1 = std::cosh(k1), s1 = std::sinh(k1);
  Eigen::Matrix2cd blk;
  blk << c1, mi * s1, -mi * s1, c1;
  for (index_t k = 0; k < sites; ++k) {
    m.middleRows(2 * k, 2) = blk * m.middleRows(2 * k, 2);
    m.middleCols(2 * k, 2) = m.middleCols(2 * k, 2) * blk;
  }

  Eigen::VectorXd evals;
  hermitian_eig(m, evals);

  FfTransferMatrix tm;
  tm.k1 = k1;
  tm.k2 = k2;
  tm.l_sites = l_sites;
  tm.eps.resize(static_cast<std::size_t>(n / 2));
  tm.modes.resize(n, n);
  // Eigenvalues pair as (mu, 1/mu) with conjugate vectors; the upper half
  // carries eps = log(mu) >= 0 and its real and imaginary parts are the
  // orthonormal Majorana pair of the mode.
  const double sq2 = std::sqrt(2.0);
  for (index_t p = 0; p < n / 2; ++p) {
    const index_t col = n / 2 + p;
    const double mu = evals(col);
    if (!(mu > 0)) throw Error("column operator lost positivity");
    tm.eps[static_cast<std::size_t>(p)] = std::log(mu);
    tm.modes.row(2 * p) = (sq2 * m.col(col).real()).transpose();
    tm.modes.row(2 * p + 1) = (sq2 * m.col(col).imag()).transpose();
  }
  orthogonality_polish(tm.modes);
  return tm;
}

Eigen::MatrixXcd CorrMatrix::dense() const {
  const std::complex<double> i1(0.0, 1.0);
  return Eigen::MatrixXcd::Identity(gamma.rows(), gamma.cols()) + i1 * gamma;
}

CorrMatrix correlation_matrix(const FfTransferMatrix& tm) {
  std::vector<double> nu(tm.eps.size());
  for (std::size_t m = 0; m < nu.size(); ++m) nu[m] = std::tanh(0.5 * tm.eps[m]);
  return CorrMatrix{corr_from_modes(tm, nu)};
}

CorrMatrix ground_state_corr(const FfTransferMatrix& tm) {
  std::vector<double> nu(tm.eps.size(), 1.0);
  return CorrMatrix{corr_from_modes(tm, nu)};
}

CanonicalPairs canonical_pairs(const Eigen::MatrixXd& gamma) {
  const index_t n = gamma.rows();
  if (n % 2 != 0 || gamma.cols() != n) throw Error("canonical_pairs needs an even square matrix");
  const double asym = (gamma + gamma.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  if (asym > 1e-9 * scale) throw Error("canonical_pairs input is not antisymmetric");

  const std::complex<double> i1(0.0, 1.0);
  Eigen::MatrixXcd h = i1 * gamma.cast<std::complex<double>>();
  Eigen::VectorXd evals;
  hermitian_eig(h, evals);

  const double ztol = std::max(1e-14, 1e-13 * scale);
  CanonicalPairs out;
  out.r.resize(n, n);
  const double sq2 = std::sqrt(2.0);
  index_t filled = 0;
  std::vector<index_t> zero_cols;
  // Descending positive eigenvalues carry the pairs; the conjugate negative
  // half is implicit in the real and imaginary parts.
  for (index_t c = n - 1; c >= 0; --c) {
    const double lam = evals(c);
    if (lam <= ztol) {
      if (std::abs(lam) <= ztol) zero_cols.push_back(c);
      continue;
    }
    out.nu.push_back(lam);
    out.r.col(2 * filled) = sq2 * h.col(c).real();
    out.r.col(2 * filled + 1) = sq2 * h.col(c).imag();
    ++filled;
  }
  // Near-null cluster: complex vectors there mix arbitrarily with their
  // conjugates, so take a real orthonormal basis of the joint span and pair
  // it arbitrarily at weight zero.
  if (!zero_cols.empty()) {
    const index_t nz = static_cast<index_t>(zero_cols.size());
    if (nz % 2 != 0) throw Error("canonical_pairs found an odd null cluster");
    Eigen::MatrixXd cand(n, 2 * nz);
    for (index_t j = 0; j < nz; ++j) {
      cand.col(2 * j) = h.col(zero_cols[static_cast<std::size_t>(j)]).real();
      cand.col(2 * j + 1) = h.col(zero_cols[static_cast<std::size_t>(j)]).imag();
    }
    if (filled > 0) {
      const auto fixed = out.r.leftCols(2 * filled);
      cand -= fixed * (fixed.transpose() * cand);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cand);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, nz);
    for (index_t j = 0; j < nz / 2; ++j) {
      out.nu.push_back(0.0);
      out.r.col(2 * filled) = q.col(2 * j);
      out.r.col(2 * filled + 1) = q.col(2 * j + 1);
      ++filled;
    }
  }
  if (filled != n / 2) throw Error("canonical_pairs lost modes while pairing");
  orthogonality_polish(out.r);
  return out;
}

std::vector<double> tm_spectrum_at_scale(const CorrMatrix& c, double tol) {
  CanonicalPairs cp = canonical_pairs(c.gamma);
  std::vector<double> eps(cp.nu.size());
  for (std::size_t m = 0; m < cp.nu.size(); ++m) {
    double nu = cp.nu[m];
    if (nu > 1.0 + tol) {
      std::ostringstream os;
      os << "correlation weight " << nu << " is not Gaussian-consistent";
      throw Error(os.str());
    }
    nu = std::min(nu, 1.0 - 1e-16);
    eps[m] = 2.0 * std::atanh(nu);
  }
  std::reverse(eps.begin(), eps.end());
  return eps;
}

double dispersion_momentum(double k1, double k2, double eps) {
  const double num = std::cosh(2 * k1) * std::cosh(2 * k2) - std::cosh(eps);
  const double den = std::sinh(2 * k1) * std::sinh(2 * k2);
  return std::acos(std::clamp(num / den, -1.0, 1.0));
}

namespace {

// Tiling of an n-site stretch into blocks of p sites. Block b holds sites
// [b p, (b+1) p); the tied disentangler at boundary j covers sites
// [j p + 1, (j+1) p + 1), one site past the boundary.
struct LayerGeom {
  int p = 0;
  int nb = 0;
  index_t block_lo(int b) const { return 2 * static_cast<index_t>(b) * p; }
  index_t bound_lo(int j) const { return 2 * (static_cast<index_t>(j) * p + 1); }
};

// In-place conjugation of the window rows/cols [lo, lo+2p) by the gate g:
// m <- E^T m E with E = g embedded at lo.
void conj_gate(Eigen::MatrixXd& m, const Eigen::MatrixXd& g, index_t lo) {
  const index_t w = g.rows();
  m.middleRows(lo, w) = g.transpose() * m.middleRows(lo, w);
  m.middleCols(lo, w) = m.middleCols(lo, w) * g;
}

// Block b of U^T gamma U computed from the local window only: the two
// disentanglers that touch block b lie within [lo, hi).
Eigen::MatrixXd disentangled_block(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& u,
                                   const LayerGeom& geom, int b) {
  const index_t two_p = 2 * geom.p;
  const index_t lo = std::max<index_t>(0, b > 0 ? geom.bound_lo(b - 1) : geom.block_lo(0));
  const index_t hi = std::min<index_t>(2 * static_cast<index_t>(geom.nb) * geom.p,
                                       b + 1 < geom.nb ? geom.bound_lo(b) + two_p
                                                       : geom.block_lo(b) + two_p);
  Eigen::MatrixXd win = gamma.block(lo, lo, hi - lo, hi - lo);
  if (b > 0) conj_gate(win, u, geom.bound_lo(b - 1) - lo);
  if (b + 1 < geom.nb) conj_gate(win, u, geom.bound_lo(b) - lo);
  return win.block(geom.block_lo(b) - lo, geom.block_lo(b) - lo, two_p, two_p);
}

// Summed canonical weight sitting in the discarded slots after the block
// rotation: the pair entry (2t+1, 2t) of w^T B w for t in [q, p).
double discarded_weight(const Eigen::MatrixXd& b, const Eigen::MatrixXd& w, int q, int p) {
  double f = 0;
  for (int t = q; t < p; ++t) {
    const auto wx = w.col(2 * t);
    const auto wy = w.col(2 * t + 1);
    f += wy.dot(b * wx);
  }
  return f;
}

double layer_cost(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& u,
                  const Eigen::MatrixXd& w, const LayerGeom& geom, int q) {
  double f = 0;
  for (int b = 0; b < geom.nb; ++b)
    f += discarded_weight(disentangled_block(gamma, u, geom, b), w, q, geom.p);
  return f;
}

// Closed-form optimal tied block rotation given the disentangler: the block
// sum of U^T gamma U is canonicalized with ascending weights, so the kept
// slots carry the smallest weights and the discarded the largest.
Eigen::MatrixXd best_block_rotation(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& u,
                                    const LayerGeom& geom) {
  const index_t two_p = 2 * geom.p;
  Eigen::MatrixXd bbar = Eigen::MatrixXd::Zero(two_p, two_p);
  for (int b = 0; b < geom.nb; ++b) bbar += disentangled_block(gamma, u, geom, b);
  bbar = 0.5 * (bbar - bbar.transpose().eval());
  CanonicalPairs cp = canonical_pairs(bbar);
  Eigen::MatrixXd w(two_p, two_p);
  for (int t = 0; t < geom.p; ++t) {
    w.col(2 * t) = cp.r.col(2 * (geom.p - 1 - t));
    w.col(2 * t + 1) = cp.r.col(2 * (geom.p - 1 - t) + 1);
  }
  return w;
}

// Euclidean gradient of the layer cost with respect to the tied
// disentangler: per boundary, d/dE tr(E^T A E N) = 2 A E N with A the
// locally undone gamma and N = W Pi W^T the discarded-pair selector.
Eigen::MatrixXd layer_cost_grad(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& w, const LayerGeom& geom, int q) {
  const index_t two_p = 2 * geom.p;
  const index_t n = 2 * static_cast<index_t>(geom.nb) * geom.p;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(two_p, two_p);
  for (int t = q; t < geom.p; ++t) {
    pi(2 * t, 2 * t + 1) = 0.5;
    pi(2 * t + 1, 2 * t) = -0.5;
  }
  const Eigen::MatrixXd nsel = w * pi * w.transpose();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(two_p, two_p);
  for (int j = 0; j + 1 < geom.nb; ++j) {
    const index_t win_lo = geom.block_lo(j);
    const index_t lo = std::max<index_t>(0, j > 0 ? geom.bound_lo(j - 1) : win_lo);
    const index_t hi = std::min<index_t>(n, j + 2 < geom.nb ? geom.bound_lo(j + 1) + two_p
                                                            : geom.block_lo(j + 1) + two_p);
    Eigen::MatrixXd wide = gamma.block(lo, lo, hi - lo, hi - lo);
    if (j > 0) conj_gate(wide, u, geom.bound_lo(j - 1) - lo);
    conj_gate(wide, u, geom.bound_lo(j) - lo);
    if (j + 2 < geom.nb) conj_gate(wide, u, geom.bound_lo(j + 1) - lo);
    const index_t off = win_lo - lo;
    Eigen::MatrixXd win = wide.block(off, off, 2 * two_p, 2 * two_p);
    // Undo the central disentangler so the window holds A, then rebuild the
    // two block selectors in window coordinates.
    Eigen::MatrixXd a = win;
    const index_t ulo = geom.bound_lo(j) - win_lo;
    a.middleRows(ulo, two_p) = u * a.middleRows(ulo, two_p);
    a.middleCols(ulo, two_p) = a.middleCols(ulo, two_p) * u.transpose();
    Eigen::MatrixXd nw = Eigen::MatrixXd::Zero(2 * two_p, 2 * two_p);
    nw.topLeftCorner(two_p, two_p) = nsel;
    nw.bottomRightCorner(two_p, two_p) = nsel;
    Eigen::MatrixXd eu = Eigen::MatrixXd::Identity(2 * two_p, 2 * two_p);
    eu.block(ulo, ulo, two_p, two_p) = u;
    const Eigen::MatrixXd g = 2.0 * a * eu * nw;
    grad += g.block(ulo, ulo, two_p, two_p);
  }
  return grad;
}

Eigen::MatrixXd random_rotation(index_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd g(n, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < n; ++i) g(i, j) = dist(eng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return q;
}

}  // namespace

FfLayer optimize_ff_layer(const CorrMatrix& c, int p_sites, int q_sites,
                          const FfOptimizeOptions& opts) {
  const index_t n = c.modes();
  const index_t sites = n / 2;
  if (p_sites < 1 || q_sites < 0 || q_sites > p_sites)
    throw Error("layer needs 0 <= q_sites <= p_sites");
  if (sites % p_sites != 0) throw Error("chain does not tile into blocks");
  LayerGeom geom{p_sites, static_cast<int>(sites / p_sites)};
  const index_t two_p = 2 * static_cast<index_t>(p_sites);

  FfLayer best;
  best.p_sites = p_sites;
  best.q_sites = q_sites;
  best.u = Eigen::MatrixXd::Identity(two_p, two_p);
  best.w = Eigen::MatrixXd::Identity(two_p, two_p);
  if (q_sites == p_sites) {
    best.converged = true;
    return best;
  }

  const int runs = std::max(1, opts.restarts);
  bool have_best = false;
  for (int rs = 0; rs < runs; ++rs) {
    Eigen::MatrixXd u = rs == 0 ? Eigen::MatrixXd::Identity(two_p, two_p)
                                : random_rotation(two_p, opts.seed + static_cast<std::uint64_t>(rs));
    Eigen::MatrixXd w = best_block_rotation(c.gamma, u, geom);
    double cost = layer_cost(c.gamma, u, w, geom, q_sites);
    int iters = 0;
    bool converged = false;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
      if (geom.nb > 1) {
        Eigen::MatrixXcd uc = u.cast<std::complex<double>>();
        StiefelOptions so;
        so.max_iter = opts.inner_steps;
        so.tol = 0.1 * opts.tol;
        StiefelReport rep = stiefel_maximize(
            uc,
            [&](const Eigen::MatrixXcd& m) {
              return layer_cost(c.gamma, m.real(), w, geom, q_sites);
            },
            [&](const Eigen::MatrixXcd& m) {
              return layer_cost_grad(c.gamma, m.real(), w, geom, q_sites)
                  .cast<std::complex<double>>();
            },
            so);
        u = uc.real();
        iters += rep.iterations;
      }
      w = best_block_rotation(c.gamma, u, geom);
      const double next = layer_cost(c.gamma, u, w, geom, q_sites);
      const double change = std::abs(next - cost) / std::max(1.0, std::abs(next));
      cost = next;
      ++iters;
      if (change < opts.tol || geom.nb == 1) {
        converged = true;
        break;
      }
    }
    if (!have_best || cost > best.cost) {
      have_best = true;
      best.u = u;
      best.w = w;
      best.cost = cost;
      best.iterations = iters;
      best.converged = converged;
    }
  }
  return best;
}

CorrMatrix coarse_grain_corr(const CorrMatrix& c, const FfLayer& layer) {
  const index_t n = c.modes();
  const index_t sites = n / 2;
  const int p = layer.p_sites, q = layer.q_sites;
  if (sites % p != 0) throw Error("chain does not tile into blocks");
  LayerGeom geom{p, static_cast<int>(sites / p)};

  Eigen::MatrixXd g = c.gamma;
  for (int j = 0; j + 1 < geom.nb; ++j) conj_gate(g, layer.u, geom.bound_lo(j));
  for (int b = 0; b < geom.nb; ++b) conj_gate(g, layer.w, geom.block_lo(b));

  const index_t kept = 2 * static_cast<index_t>(q) * geom.nb;
  Eigen::MatrixXd out(kept, kept);
  std::vector<index_t> keep;
  keep.reserve(static_cast<std::size_t>(kept));
  for (int b = 0; b < geom.nb; ++b)
    for (index_t k = 0; k < 2 * static_cast<index_t>(q); ++k) keep.push_back(geom.block_lo(b) + k);
  for (index_t j = 0; j < kept; ++j)
    for (index_t i = 0; i < kept; ++i)
      out(i, j) = g(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
  out = 0.5 * (out - out.transpose().eval());
  return CorrMatrix{std::move(out)};
}

namespace {

struct ConeCol {
  int layer = 0;
  int side = 0;
  bool crossing = false;
  bool active = true;
};

}  // namespace

ImpurityMap impurity_isometry(index_t l_sites, const std::vector<FfLayer>& layers) {
  const index_t n = 4 * l_sites;
  Eigen::MatrixXd iso = Eigen::MatrixXd::Identity(n, n);
  std::vector<ConeCol> cols(static_cast<std::size_t>(n));
  for (index_t c = 0; c < n; ++c) cols[static_cast<std::size_t>(c)].side = c < n / 2 ? 0 : 1;

  for (std::size_t s = 0; s < layers.size(); ++s) {
    const FfLayer& lay = layers[s];
    const int p = lay.p_sites, q = lay.q_sites;
    const index_t two_p = 2 * static_cast<index_t>(p);
    bool applied = false;
    for (int side = 0; side < 2; ++side) {
      std::vector<index_t> act;
      for (index_t c = 0; c < iso.cols(); ++c)
        if (cols[static_cast<std::size_t>(c)].active && cols[static_cast<std::size_t>(c)].side == side)
          act.push_back(c);
      const index_t sites = static_cast<index_t>(act.size()) / 2;
      if (sites < 1 + p) continue;

      // The centre-adjacent site freezes as the crossing; the remainder of
      // the half tiles into blocks anchored at the centre, and a partial
      // block at the far edge freezes untouched.
      auto freeze = [&](index_t site_idx, bool crossing) {
        for (int k = 0; k < 2; ++k) {
          ConeCol& cc = cols[static_cast<std::size_t>(act[static_cast<std::size_t>(2 * site_idx + k)])];
          cc.active = false;
          cc.layer = static_cast<int>(s) + 1;
          cc.crossing = crossing;
        }
      };
      const index_t m = sites - 1;
      const index_t nb = m / p;
      const index_t rem = m % p;
      index_t first_blocked = 0;
      if (side == 0) {
        freeze(sites - 1, true);
        for (index_t e = 0; e < rem; ++e) freeze(e, false);
        first_blocked = rem;
      } else {
        freeze(0, true);
        for (index_t e = 0; e < rem; ++e) freeze(m - e, false);
        first_blocked = 1;
      }
      if (nb == 0) continue;
      applied = true;

      std::vector<index_t> blocked;
      for (index_t t = 0; t < 2 * nb * p; ++t)
        blocked.push_back(act[static_cast<std::size_t>(2 * first_blocked + t)]);
      Eigen::MatrixXd sub(n, blocked.size());
      for (std::size_t j = 0; j < blocked.size(); ++j) sub.col(static_cast<index_t>(j)) = iso.col(blocked[j]);
      LayerGeom geom{p, static_cast<int>(nb)};
      for (int j = 0; j + 1 < geom.nb; ++j)
        sub.middleCols(geom.bound_lo(j), two_p) = sub.middleCols(geom.bound_lo(j), two_p) * lay.u;
      for (int b = 0; b < geom.nb; ++b)
        sub.middleCols(geom.block_lo(b), two_p) = sub.middleCols(geom.block_lo(b), two_p) * lay.w;
      for (index_t b = 0; b < nb; ++b) {
        for (index_t k = 0; k < two_p; ++k) {
          const index_t col = blocked[static_cast<std::size_t>(2 * b * p + k)];
          if (k < 2 * static_cast<index_t>(q)) {
            iso.col(col) = sub.col(2 * b * p + k);
          } else {
            cols[static_cast<std::size_t>(col)].active = false;
            cols[static_cast<std::size_t>(col)].layer = -1;  // discarded
          }
        }
      }
    }
    if (!applied) break;
  }

  ImpurityMap out;
  std::vector<index_t> keep;
  for (index_t c = 0; c < n; ++c)
    if (cols[static_cast<std::size_t>(c)].layer >= 0) keep.push_back(c);
  out.iso.resize(n, static_cast<index_t>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const ConeCol& cc = cols[static_cast<std::size_t>(keep[j])];
    out.iso.col(static_cast<index_t>(j)) = iso.col(keep[j]);
    out.layer_of.push_back(cc.active ? 0 : cc.layer);
    out.side_of.push_back(cc.side);
    out.crossing.push_back(cc.crossing);
  }
  return out;
}

std::vector<ImpurityMode> impurity_spectrum(const CorrMatrix& c0, const ImpurityMap& imp,
                                            double tol) {
  Eigen::MatrixXd g = imp.iso.transpose() * c0.gamma * imp.iso;
  g = 0.5 * (g - g.transpose().eval());
  CanonicalPairs cp = canonical_pairs(g);
  std::vector<ImpurityMode> out(cp.nu.size());
  for (std::size_t m = 0; m < cp.nu.size(); ++m) {
    double nu = cp.nu[m];
    if (nu > 1.0 + tol) throw Error("impurity correlation weight is not Gaussian-consistent");
    nu = std::min(nu, 1.0 - 1e-16);
    ImpurityMode& mode = out[cp.nu.size() - 1 - m];
    mode.eps = 2.0 * std::atanh(nu);
    double wt = 0;
    for (std::size_t c = 0; c < imp.crossing.size(); ++c) {
      if (!imp.crossing[c]) continue;
      const index_t ci = static_cast<index_t>(c);
      wt += 0.5 * (cp.r(ci, 2 * static_cast<index_t>(m)) * cp.r(ci, 2 * static_cast<index_t>(m)) +
                   cp.r(ci, 2 * static_cast<index_t>(m) + 1) * cp.r(ci, 2 * static_cast<index_t>(m) + 1));
    }
    mode.weight = wt;
    mode.discrete = wt > 0.5;
  }
  return out;
}

Eigen::MatrixXd half_isometry(const ImpurityMap& imp, int side) {
  const index_t n = imp.iso.rows();
  const index_t row0 = side == 0 ? 0 : n / 2;
  std::vector<index_t> keep;
  for (std::size_t c = 0; c < imp.side_of.size(); ++c)
    if (imp.side_of[c] == side) keep.push_back(static_cast<index_t>(c));
  Eigen::MatrixXd out(n / 2, static_cast<index_t>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    out.col(static_cast<index_t>(j)) = imp.iso.block(row0, keep[j], n / 2, 1);
  return out;
}

CorrMatrix half_block(const CorrMatrix& c, const ImpurityMap& imp, int side) {
  std::vector<index_t> keep;
  for (std::size_t j = 0; j < imp.side_of.size(); ++j)
    if (imp.side_of[j] == side) keep.push_back(static_cast<index_t>(j));
  const index_t k = static_cast<index_t>(keep.size());
  Eigen::MatrixXd g(k, k);
  for (index_t b = 0; b < k; ++b)
    for (index_t a = 0; a < k; ++a)
      g(a, b) = c.gamma(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
  return CorrMatrix{std::move(g)};
}

EntSpectrum entanglement_spectrum_ff(const CorrMatrix& c_half, int max_schmidt) {
  CanonicalPairs cp = canonical_pairs(c_half.gamma);
  EntSpectrum out;
  out.delta.resize(cp.nu.size());
  for (std::size_t m = 0; m < cp.nu.size(); ++m) {
    const double nu = std::min(std::abs(cp.nu[m]), 1.0 - 1e-16);
    out.delta[cp.nu.size() - 1 - m] = std::atanh(nu);
  }
  // Schmidt values are subset products of exp(-delta) normalized by the full
  // partition sum; modes beyond the amplitude floor only renormalize.
  double log_z = 0;
  for (double d : out.delta) log_z += std::log1p(std::exp(-2.0 * d));
  std::vector<double> vals{1.0};
  for (double d : out.delta) {
    const double f = std::exp(-d);
    if (f < 1e-18) break;
    std::size_t sz = vals.size();
    for (std::size_t i = 0; i < sz; ++i) vals.push_back(vals[i] * f);
    std::sort(vals.begin(), vals.end(), std::greater<double>());
    if (vals.size() > static_cast<std::size_t>(max_schmidt)) vals.resize(static_cast<std::size_t>(max_schmidt));
  }
  const double norm = std::exp(-0.5 * log_z);
  for (double v : vals) out.schmidt.push_back(v * norm);
  return out;
}

std::vector<double> svd_overlap(const CorrMatrix& c_ground, const ImpurityMap& imp,
                                int side, int n_modes) {
  const index_t n = c_ground.modes();
  const index_t half = n / 2;
  const index_t row0 = side == 0 ? 0 : half;
  CanonicalPairs cp = canonical_pairs(c_ground.gamma.block(row0, row0, half, half));
  const index_t pairs = static_cast<index_t>(cp.nu.size());
  const index_t take = std::min<index_t>(n_modes, pairs);
  // Dominant entanglement modes are the smallest weights, at the tail of the
  // descending canonical order.
  Eigen::MatrixXd u_svd(half, 2 * take);
  for (index_t m = 0; m < take; ++m) {
    u_svd.col(2 * m) = cp.r.col(2 * (pairs - 1 - m));
    u_svd.col(2 * m + 1) = cp.r.col(2 * (pairs - 1 - m) + 1);
  }
  const Eigen::MatrixXd overlap = u_svd.transpose() * half_isometry(imp, side);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
  std::vector<double> out(svd.singularValues().data(),
                          svd.singularValues().data() + svd.singularValues().size());
  return out;
}

FfRunResult run_ff_scheme(double lambda, double delta, index_t l_sites, int p_sites,
                          int q_sites, int s_max, const FfOptimizeOptions& opts) {
  FfRunResult out;
  const FfCouplings k = build_couplings(lambda, delta);
  out.tm = diagonalize_tm(k.k1, k.k2, l_sites);
  out.corr.push_back(correlation_matrix(out.tm));
  for (int s = 0; s < s_max; ++s) {
    const index_t sites = out.corr.back().modes() / 2;
    if (sites < p_sites || sites % p_sites != 0) break;
    FfLayer lay = optimize_ff_layer(out.corr.back(), p_sites, q_sites, opts);
    out.corr.push_back(coarse_grain_corr(out.corr.back(), lay));
    out.layers.push_back(std::move(lay));
  }
  return out;
}

}  // namespace tmcg
