#include <tmcg/umps.hpp>

#include <cmath>

namespace tmcg {

namespace {

Eigen::MatrixXcd to_mat(const Tensor& x) { return as_matrix(x.permuted({"k", "b"}), {"k"}); }

Tensor from_mat(const Eigen::MatrixXcd& m) {
  return from_matrix(m, {"k"}, {m.rows()}, {"b"}, {m.cols()});
}

Eigen::VectorXcd to_vec(const Tensor& x) {
  Tensor p = x.permuted({"k", "b"});
  Eigen::VectorXcd v(p.size());
  for (index_t i = 0; i < p.size(); ++i) v(i) = p.data()[i];
  return v;
}

Tensor bond_tensor(const Eigen::VectorXcd& v, index_t d) {
  Tensor t = Tensor::zeros({"k", "b"}, {d, d});
  for (index_t i = 0; i < t.size(); ++i) t.data()[i] = v(i);
  return t;
}

// Rotate away the trace phase, Hermitize, and flag negative parts; fixed
// points of an injective transfer map are proportional to Hermitian PSD
// matrices up to an overall phase.
Eigen::MatrixXcd hermitize_fixed_point(const Eigen::MatrixXcd& m, const char* who) {
  Eigen::MatrixXcd out = m;
  cplx tr = out.trace();
  if (std::abs(tr) < 1e-14 * out.norm())
    warn(std::string(who) + ": fixed point has near-zero trace");
  else
    out *= std::conj(tr) / std::abs(tr);
  double defect = (out - out.adjoint()).norm() / out.norm();
  if (defect > 1e-8)
    warn(std::string(who) + ": fixed point Hermiticity defect " + std::to_string(defect));
  out = 0.5 * (out + out.adjoint().eval());
  return out;
}

}  // namespace

Tensor transfer_right(const Tensor& a, const Tensor& x) {
  Tensor tmp = contract(a, x, {{"r", "k"}});  // (l, p, b)
  Tensor y = contract(tmp, a.conjugated().renamed({{"l", "bl"}, {"r", "b"}}),
                      {{"p", "p"}, {"b", "b"}});  // (l, bl)
  return y.renamed({{"l", "k"}, {"bl", "b"}});
}

Tensor transfer_left(const Tensor& a, const Tensor& x) {
  Tensor tmp = contract(x, a, {{"k", "l"}});  // (b, p, r)
  Tensor y = contract(tmp, a.conjugated().renamed({{"l", "b"}, {"r", "br"}}),
                      {{"b", "b"}, {"p", "p"}});  // (r, br)
  return y.renamed({{"r", "k"}, {"br", "b"}});
}

Tensor transfer_right_op(const Tensor& a, const Tensor& op, const Tensor& x) {
  Tensor tmp = contract(a, x, {{"r", "k"}});           // (l, p, b)
  Tensor t2 = contract(op, tmp, {{"i", "p"}});         // (o, l, b)
  Tensor y = contract(t2, a.conjugated().renamed({{"l", "bl"}, {"r", "b"}}),
                      {{"o", "p"}, {"b", "b"}});       // (l, bl)
  return y.renamed({{"l", "k"}, {"bl", "b"}});
}

Tensor transfer_left_op(const Tensor& a, const Tensor& op, const Tensor& x) {
  Tensor tmp = contract(x, a, {{"k", "l"}});           // (b, p, r)
  Tensor t2 = contract(op, tmp, {{"i", "p"}});         // (o, b, r)
  Tensor y = contract(t2, a.conjugated().renamed({{"l", "b"}, {"r", "br"}}),
                      {{"o", "p"}, {"b", "b"}});       // (r, br)
  return y.renamed({{"r", "k"}, {"br", "b"}});
}

Tensor mixed_transfer_right(const Tensor& ket, const Tensor& bra, const Tensor& x) {
  Tensor tmp = contract(ket, x, {{"r", "k"}});  // (l, p, b)
  Tensor y = contract(tmp, bra.conjugated().renamed({{"l", "bl"}, {"r", "b"}}),
                      {{"p", "p"}, {"b", "b"}});
  return y.renamed({{"l", "k"}, {"bl", "b"}});
}

Tensor mixed_transfer_left(const Tensor& ket, const Tensor& bra, const Tensor& x) {
  Tensor tmp = contract(x, ket, {{"k", "l"}});  // (b, p, r)
  Tensor y = contract(tmp, bra.conjugated().renamed({{"l", "b"}, {"r", "br"}}),
                      {{"b", "b"}, {"p", "p"}});
  return y.renamed({{"r", "k"}, {"br", "b"}});
}

cplx pair_lr(const Tensor& lx, const Tensor& rx) {
  return contract(lx, rx, {{"k", "k"}, {"b", "b"}}).data()[0];
}

Eigen::MatrixXcd transfer_matrix(const Tensor& a) {
  Tensor t = contract(a, a.conjugated().renamed({{"l", "lb"}, {"r", "rb"}}), {{"p", "p"}});
  t = t.permuted({"l", "lb", "r", "rb"});
  t = merge_legs(t, {"l", "lb"}, "row");
  t = merge_legs(t, {"r", "rb"}, "col");
  return as_matrix(t, {"row"});
}

UniformMps normalize_and_fixed_points(UniformMps m, const EigOptions& opts) {
  const index_t d = m.bond_dim();
  const index_t n = d * d;
  if (m.a.dim("r") != d) throw Error("normalize: left and right bond dimensions differ");

  EigOptions optr = opts;
  if (optr.v0.size() == 0 && m.r) optr.v0 = to_vec(*m.r);
  auto applyR = [&m, d](const Eigen::VectorXcd& v) {
    return to_vec(transfer_right(m.a, bond_tensor(v, d)));
  };
  EigResult er = eig_dominant(applyR, n, optr);
  if (!er.converged) warn("normalize: right fixed point iteration did not fully converge");
  cplx lam = er.value;
  if (std::abs(lam) < 1e-300) throw Error("normalize: vanishing transfer eigenvalue");
  if (std::abs(lam.imag()) > 1e-8 * std::abs(lam) || lam.real() <= 0.0)
    throw Error("normalize: dominant transfer eigenvalue is not positive real");
  if (er.gap_ratio > 1.0 - 1e-8)
    warn("normalize: near-degenerate dominant transfer eigenvalue (non-injective state?)");

  EigOptions optl = opts;
  if (optl.v0.size() == 0 && m.l) optl.v0 = to_vec(*m.l);
  auto applyL = [&m, d](const Eigen::VectorXcd& v) {
    return to_vec(transfer_left(m.a, bond_tensor(v, d)));
  };
  EigResult el = eig_dominant(applyL, n, optl);
  if (!el.converged) warn("normalize: left fixed point iteration did not fully converge");
  if (std::abs(el.value - lam) > 1e-6 * std::abs(lam))
    warn("normalize: left/right dominant eigenvalues disagree");

  const double scale = std::sqrt(lam.real());
  m.a *= cplx(1.0 / scale, 0.0);
  m.norm_factor = lam.real();

  Eigen::MatrixXcd rm =
      hermitize_fixed_point(to_mat(bond_tensor(er.vector, d)), "normalize(r)");
  Eigen::MatrixXcd lm = hermitize_fixed_point(to_mat(bond_tensor(el.vector, d)), "normalize(l)");

  double rtr = rm.trace().real();
  if (rtr <= 0.0) throw Error("normalize: right fixed point has non-positive trace");
  rm /= rtr;
  Tensor rt = from_mat(rm);
  Tensor lt = from_mat(lm);
  cplx pairing = pair_lr(lt, rt);
  if (std::abs(pairing) < 1e-14) throw Error("normalize: (l|r) vanishes");
  lt *= 1.0 / pairing;

  m.r = rt;
  m.l = lt;
  if (std::abs(lam.real() - 1.0) > 1e-10) m.canonical = Canonical::none;
  return m;
}

namespace {

UniformMps ensure_fixed_points(const UniformMps& m) {
  if (m.has_fixed_points()) return m;
  return normalize_and_fixed_points(m);
}

// Hermitian eigendecomposition with negative clamp; returns (U, w descending).
void psd_eig(const Eigen::MatrixXcd& h, Eigen::MatrixXcd& u, Eigen::VectorXd& w,
             const char* who) {
  HermEigResult he = eig_all_hermitian(h);
  u = he.vectors;
  w = he.values;
  double top = std::max(std::abs(w(0)), 1e-300);
  for (index_t i = 0; i < w.size(); ++i) {
    if (w(i) < -1e-10 * top)
      warn(std::string(who) + ": fixed point has a negative eigenvalue " + std::to_string(w(i)));
    if (w(i) < 0.0) w(i) = 0.0;
  }
}

Tensor gauge_apply(const Eigen::MatrixXcd& g, const Tensor& a, const Eigen::MatrixXcd& ginv) {
  Tensor gt = from_matrix(g, {"n"}, {g.rows()}, {"l"}, {g.cols()});
  Tensor git = from_matrix(ginv, {"r"}, {ginv.rows()}, {"n2"}, {ginv.cols()});
  Tensor t1 = contract(gt, a, {{"l", "l"}});          // (n, p, r)
  Tensor t2 = contract(t1, git, {{"r", "r"}});        // (n, p, n2)
  return t2.renamed({{"n", "l"}, {"n2", "r"}});
}

}  // namespace

CanonicalResult left_canonicalize(const UniformMps& m0) {
  UniformMps m = ensure_fixed_points(m0);
  const index_t d = m.bond_dim();
  Eigen::MatrixXcd u;
  Eigen::VectorXd w;
  psd_eig(to_mat(*m.l), u, w, "left_canonicalize");
  const double cutoff = 1e-14 * std::max(w(0), 1e-300);
  Eigen::VectorXd sq(d), isq(d);
  for (index_t i = 0; i < d; ++i) {
    sq(i) = std::sqrt(std::max(w(i), 0.0));
    if (w(i) < cutoff) {
      warn("left_canonicalize: singular left fixed point (non-injective state)");
      isq(i) = 0.0;
    } else {
      isq(i) = 1.0 / sq(i);
    }
  }
  // G with G^dagger G = conj(l): the stored left fixed point satisfies
  // sum_p A_p^T l conj(A_p) = l, i.e. conj(l) is the textbook left
  // environment, so the left-canonical gauge is G = sqrt(w) U^T.
  Eigen::MatrixXcd g = sq.asDiagonal() * u.transpose();
  Eigen::MatrixXcd ginv = u.conjugate() * isq.asDiagonal();

  CanonicalResult out;
  out.gauge = from_matrix(g, {"new"}, {d}, {"old"}, {d});
  out.gauge_inv = from_matrix(ginv, {"old"}, {d}, {"new"}, {d});
  out.state.a = gauge_apply(g, m.a, ginv);
  out.state.canonical = Canonical::left;
  out.state.norm_factor = m.norm_factor;
  out.state.l = from_mat(Eigen::MatrixXcd::Identity(d, d));
  Eigen::MatrixXcd rnew = g * to_mat(*m.r) * g.adjoint();
  double tr = rnew.trace().real();
  if (tr <= 0.0) throw Error("left_canonicalize: transformed right fixed point has bad trace");
  rnew /= tr;
  out.state.r = from_mat(rnew);
  return out;
}

CanonicalResult right_canonicalize(const UniformMps& m0) {
  UniformMps m = ensure_fixed_points(m0);
  const index_t d = m.bond_dim();
  Eigen::MatrixXcd v;
  Eigen::VectorXd w;
  psd_eig(to_mat(*m.r), v, w, "right_canonicalize");
  const double cutoff = 1e-14 * std::max(w(0), 1e-300);
  Eigen::VectorXd sq(d), isq(d);
  for (index_t i = 0; i < d; ++i) {
    sq(i) = std::sqrt(std::max(w(i), 0.0));
    if (w(i) < cutoff) {
      warn("right_canonicalize: singular right fixed point (non-injective state)");
      isq(i) = 0.0;
    } else {
      isq(i) = 1.0 / sq(i);
    }
  }
  // G^dagger G = r^{-1} makes the transformed right environment the identity.
  Eigen::MatrixXcd g = isq.asDiagonal() * v.adjoint();
  Eigen::MatrixXcd ginv = v * sq.asDiagonal();

  CanonicalResult out;
  out.gauge = from_matrix(g, {"new"}, {d}, {"old"}, {d});
  out.gauge_inv = from_matrix(ginv, {"old"}, {d}, {"new"}, {d});
  out.state.a = gauge_apply(g, m.a, ginv);
  out.state.canonical = Canonical::right;
  out.state.norm_factor = m.norm_factor;
  out.state.r = from_mat(Eigen::MatrixXcd::Identity(d, d));
  // l transforms with the inverse transpose pair; rescale to (l|r) = 1.
  Eigen::MatrixXcd lnew = ginv.transpose() * to_mat(*m.l) * ginv.conjugate();
  Tensor lt = from_mat(lnew);
  cplx pairing = pair_lr(lt, *out.state.r);
  if (std::abs(pairing) < 1e-14) throw Error("right_canonicalize: (l|r) vanishes");
  lt *= 1.0 / pairing;
  out.state.l = lt;
  return out;
}

std::vector<double> schmidt_spectrum(const UniformMps& m0) {
  UniformMps m = ensure_fixed_points(m0);
  Eigen::MatrixXcd lm = to_mat(*m.l), rm = to_mat(*m.r);
  Eigen::MatrixXcd u;
  Eigen::VectorXd w;
  psd_eig(lm, u, w, "schmidt_spectrum");
  Eigen::VectorXd sq = w.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXcd sql = u * sq.asDiagonal() * u.adjoint();
  // Schmidt^2 are the eigenvalues of l r^T; r Hermitian makes that l conj(r),
  // symmetrized here into a Hermitian PSD pencil.
  Eigen::MatrixXcd core = sql * rm.conjugate() * sql;
  HermEigResult he = eig_all_hermitian(core);
  std::vector<double> s;
  double total = 0.0;
  for (index_t i = 0; i < he.values.size(); ++i) {
    double v = std::max(he.values(i), 0.0);
    s.push_back(std::sqrt(v));
    total += v;
  }
  if (total <= 0.0) throw Error("schmidt_spectrum: vanishing spectrum");
  for (double& v : s) v /= std::sqrt(total);
  return s;
}

TmSpectrum tm_spectrum(const UniformMps& m0, index_t n) {
  UniformMps m = ensure_fixed_points(m0);
  const index_t d = m.bond_dim();
  if (d > 64) throw Error("tm_spectrum: bond dimension too large to materialize");
  Eigen::MatrixXcd tm = transfer_matrix(m.a);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(tm);
  if (es.info() != Eigen::Success) throw Error("tm_spectrum: eigensolver failed");
  std::vector<cplx> vals(es.eigenvalues().data(), es.eigenvalues().data() + d * d);
  std::sort(vals.begin(), vals.end(), [](cplx a, cplx b) {
    if (std::abs(std::abs(a) - std::abs(b)) > 1e-14) return std::abs(a) > std::abs(b);
    if (std::abs(a.real() - b.real()) > 1e-14) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  if (std::abs(vals[0] - 1.0) > 1e-8)
    warn("tm_spectrum: dominant eigenvalue deviates from 1 (state not normalized?)");
  TmSpectrum out;
  for (index_t i = 0; i < std::min<index_t>(n, static_cast<index_t>(vals.size())); ++i)
    out.values.push_back(vals[static_cast<size_t>(i)]);
  return out;
}

cplx static_correlator(const UniformMps& m0, const Tensor& o1, const Tensor& o2, index_t n) {
  if (n < 1) throw Error("static_correlator: separation must be >= 1");
  UniformMps m = ensure_fixed_points(m0);
  Tensor w = transfer_left_op(m.a, o1, *m.l);
  for (index_t i = 0; i + 1 < n; ++i) w = transfer_left(m.a, w);
  w = transfer_left_op(m.a, o2, w);
  return pair_lr(w, *m.r);
}

double energy_density(const UniformMps& m0, const Tensor& h) {
  UniformMps m = ensure_fixed_points(m0);
  Tensor ka = contract(*m.l, m.a, {{"k", "l"}});                 // (b, p, r)
  ka = ka.renamed({{"p", "i1"}, {"r", "mid"}});
  Tensor ka2 = contract(ka, m.a, {{"mid", "l"}});                // (b, i1, p, r)
  ka2 = ka2.renamed({{"p", "i2"}});
  Tensor th = contract(ka2, h, {{"i1", "i1"}, {"i2", "i2"}});    // (b, r, o1, o2)
  Tensor b1 = contract(th, m.a.conjugated().renamed({{"l", "b"}, {"p", "o1"}, {"r", "mb"}}),
                       {{"b", "b"}, {"o1", "o1"}});              // (r, o2, mb)
  Tensor b2 = contract(b1, m.a.conjugated().renamed({{"l", "mb"}, {"p", "o2"}, {"r", "rb"}}),
                       {{"mb", "mb"}, {"o2", "o2"}});            // (r, rb)
  cplx e = pair_lr(b2.renamed({{"r", "k"}, {"rb", "b"}}), *m.r);
  if (std::abs(e.imag()) > 1e-8 * std::max(1.0, std::abs(e)))
    warn("energy_density: non-negligible imaginary part " + std::to_string(e.imag()));
  return e.real();
}

TruncationResult truncate(const UniformMps& m0, index_t max_dim, const SvdOptions& opts) {
  UniformMps m = ensure_fixed_points(m0);
  const index_t d = m.bond_dim();

  Eigen::MatrixXcd u, v;
  Eigen::VectorXd wl, wr;
  psd_eig(to_mat(*m.l), u, wl, "truncate");
  psd_eig(to_mat(*m.r), v, wr, "truncate");
  Eigen::MatrixXcd gl = wl.cwiseMax(0.0).cwiseSqrt().asDiagonal() * u.transpose();
  Eigen::MatrixXcd rfac = v * wr.cwiseMax(0.0).cwiseSqrt().asDiagonal().toDenseMatrix();

  // Center matrix in the Schmidt gauge; its singular values are the Schmidt
  // coefficients because C C^dagger equals the right environment after the
  // left-canonical gauge.
  Eigen::MatrixXcd c = gl * rfac;
  Tensor ct = from_matrix(c, {"x"}, {d}, {"y"}, {d});
  SvdOptions so = opts;
  so.max_dim = max_dim;
  so.bond = "s";
  // Exact zeros would break the inverse square roots in the projectors.
  so.rel_tol = std::max(so.rel_tol, 1e-14);
  SvdResult sv = svd_split(ct, {"x"}, so);
  const index_t keep = static_cast<index_t>(sv.s.size());

  Eigen::MatrixXcd uk = as_matrix(sv.u.permuted({"x", "s"}), {"x"});
  Eigen::MatrixXcd vk = as_matrix(sv.vh.permuted({"s", "y"}), {"s"}).adjoint();  // d x keep
  Eigen::VectorXd sk(keep);
  for (index_t i = 0; i < keep; ++i) sk(i) = sv.s[static_cast<size_t>(i)];
  Eigen::VectorXd iskh = sk.cwiseSqrt().cwiseInverse();

  Eigen::MatrixXcd pr = rfac * vk * iskh.asDiagonal();           // d x keep
  Eigen::MatrixXcd pl = iskh.asDiagonal() * uk.adjoint() * gl;   // keep x d

  TruncationResult out;
  out.w = from_matrix(pr, {"big"}, {d}, {"small"}, {keep});
  out.w_inv = from_matrix(pl, {"small"}, {keep}, {"big"}, {d});
  out.truncation_err = sv.discarded_weight;
  double tot = sk.squaredNorm();
  for (index_t i = 0; i < keep; ++i)
    out.schmidt.push_back(sk(i) / std::sqrt(tot));

  UniformMps nt;
  nt.a = gauge_apply(pl, m.a, pr);
  // Warm starts: in the Schmidt gauge the fixed points are near-diagonal.
  EigOptions eo;
  eo.v0 = Eigen::VectorXcd::Zero(keep * keep);
  for (index_t i = 0; i < keep; ++i) eo.v0(i * keep + i) = sk(i) * sk(i) / tot;
  UniformMps norm = normalize_and_fixed_points(nt, eo);
  norm.norm_factor *= m.norm_factor;
  out.state = norm;
  return out;
}

UniformMps apply_mpo(const UniformMps& m, const Tensor& site) {
  Tensor s = site.renamed({{"l", "wl"}, {"r", "wr"}});
  Tensor t = contract(s, m.a, {{"i", "p"}});  // (o, wl, wr, l, r)
  t = merge_legs(t, {"wl", "l"}, "l");
  t = merge_legs(t, {"wr", "r"}, "r");
  UniformMps out;
  out.a = t.renamed("o", "p").permuted({"l", "p", "r"});
  return out;
}

BaselineResult baseline_ground_state(const IsingParams& params, index_t D,
                                     const BaselineOptions& opts) {
  params.validate();
  if (D < 2) throw Error("baseline_ground_state: bond dimension must be >= 2");
  Tensor h = ising_local_term(params.lambda);

  // Field-aligned product start: spin up in z.
  UniformMps state;
  state.a = Tensor::zeros({"l", "p", "r"}, {1, 2, 1});
  state.a.at({0, 0, 0}) = 1.0;
  state = normalize_and_fixed_points(state);

  std::vector<double> deltas;
  for (double dd = opts.anneal_start; dd > params.delta * (1.0 + 1e-12); dd *= 0.5)
    deltas.push_back(dd);
  deltas.push_back(params.delta);

  BaselineResult out;
  out.energy = energy_density(state, h);
  int total_steps = 0;
  for (size_t stage = 0; stage < deltas.size(); ++stage) {
    IsingParams p = params;
    p.delta = deltas[stage];
    TrotterMpo mpo = trotter_mpo(p);
    const bool final_stage = (stage + 1 == deltas.size());
    const double tol = final_stage ? opts.tol : std::max(opts.tol * 100.0, 1e-9);
    double prev = out.energy;
    for (int step = 0; step < opts.max_stage_steps; ++step) {
      if (total_steps >= opts.max_steps) break;
      ++total_steps;
      UniformMps big = apply_mpo(state, mpo.site);
      TruncationResult tr = truncate(big, D);
      state = tr.state;
      double e = energy_density(state, h);
      double change = std::abs(e - prev);
      prev = e;
      out.energy = e;
      if (change < tol) {
        if (final_stage) out.converged = true;
        break;
      }
    }
  }
  out.steps = total_steps;
  CanonicalResult cr = left_canonicalize(state);
  out.state = cr.state;
  out.energy = energy_density(out.state, h);
  return out;
}

}  // namespace tmcg
