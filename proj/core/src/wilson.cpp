#include "tmcg/wilson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace tmcg {

namespace {

// Rank reducer (big, small=1) from a generalized-TM fixed point (k, m, b);
// the merge order matches the blocked site's composite bond.
Tensor sigma_reducer(const Tensor& sigma) {
  Tensor v = merge_legs(sigma, {"k", "m", "b"}, "big");
  const index_t n = v.dim("big");
  Tensor w({"big", "small"}, {n, 1});
  w.data() = v.data();
  return w;
}

// One rung of the scale-direction MPO. bottom: the lower chain site is the
// physical end, so its l-leg dangles as p and both sites are copies of
// o_prev; otherwise the single site's coarse inputs dangle as (pd, md, qd).
Tensor rung_from(const Tensor& o_prev, const IsoGate& gate, const Tensor& w,
                 bool bottom) {
  Tensor gk = gate.g.renamed({{"vi", "cl"}, {"o", "pu"}, {"vo", "ku"}});
  Tensor gb = gate.g.conjugated().renamed({{"vi", "cr"}, {"o", "qu"}, {"vo", "bu"}});
  Tensor t;
  if (bottom) {
    Tensor lower = o_prev.renamed({{"o", "a1"}, {"i", "b1"}, {"l", "p"}, {"r", "mid"}});
    Tensor upper = o_prev.renamed({{"o", "a2"}, {"i", "b2"}, {"l", "mid"}, {"r", "mr"}});
    t = contract(lower, upper, {{"mid", "mid"}});
    t = contract(t, gk, {{"a1", "i1"}, {"a2", "i2"}});
    t = contract(t, gb, {{"b1", "i1"}, {"b2", "i2"}});
  } else {
    Tensor site = o_prev.renamed({{"o", "a2"}, {"i", "b2"}, {"l", "md"}, {"r", "mr"}});
    t = contract(site, gk.renamed({{"i1", "pd"}}), {{"a2", "i2"}});
    t = contract(t, gb.renamed({{"i1", "qd"}}), {{"b2", "i2"}});
  }
  t = merge_legs(t, {"ku", "mr", "bu"}, "big");
  t = contract(t, w, {{"big", "big"}}).renamed({{"small", "mu"}});
  return bottom ? t.permuted({"cl", "p", "cr", "pu", "qu", "mu"})
                : t.permuted({"cl", "pd", "md", "qd", "cr", "pu", "qu", "mu"});
}

// Close the scale direction of the top rung and fold its operator pair into
// the cone legs (cl slow, pu fast), leaving no upward legs.
Tensor fold_top_rung(Tensor t) {
  Tensor one({"mu"}, {1});
  one.at({0}) = 1.0;
  t = contract(t, one, {{"mu", "mu"}});
  t = merge_legs(t, {"cl", "pu"}, "clx").renamed({{"clx", "cl"}});
  t = merge_legs(t, {"cr", "qu"}, "crx").renamed({{"crx", "cr"}});
  return t;
}

double sq(double x) { return x * x; }

}  // namespace

Tensor top_cap(const Tensor& o_top) {
  for (const char* leg : {"o", "i", "l", "r"})
    if (!o_top.has_leg(leg))
      throw Error("top_cap: legs (o, i, l, r) required");
  if (o_top.dim("l") != o_top.dim("r"))
    throw Error("top_cap: chain extents differ (l " + std::to_string(o_top.dim("l")) +
                ", r " + std::to_string(o_top.dim("r")) + ")");
  const index_t n = o_top.dim("l");
  Tensor e = contract(o_top, o_top.conjugated().renamed({{"l", "lb"}, {"r", "rb"}}),
                      {{"o", "o"}, {"i", "i"}});
  Eigen::MatrixXcd m = as_matrix(e.permuted({"l", "lb", "r", "rb"}), {"l", "lb"});
  {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m);
    std::vector<double> mods(static_cast<size_t>(m.rows()));
    for (index_t i = 0; i < m.rows(); ++i)
      mods[static_cast<size_t>(i)] = std::abs(es.eigenvalues()[i]);
    std::sort(mods.begin(), mods.end(), std::greater<double>());
    if (mods.size() > 1 && mods[0] > 0.0 && mods[1] / mods[0] > 0.999)
      warn("top_cap: dominant fixed point nearly degenerate (ratio " +
           std::to_string(mods[1] / mods[0]) +
           "); the infrared cutoff is ill-determined");
  }
  // Uniform start: an exactly degenerate transfer map returns the symmetric
  // representative instead of an arbitrary basis vector.
  EigOptions eo;
  eo.v0 = Eigen::VectorXcd::Ones(m.rows());
  Eigen::VectorXcd fp = eig_dominant(m, eo).vector;
  Eigen::MatrixXcd rho(n, n);
  for (index_t l = 0; l < n; ++l)
    for (index_t lb = 0; lb < n; ++lb) rho(l, lb) = fp[l * n + lb];
  rho = 0.5 * (rho + rho.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  Eigen::VectorXcd v = es.eigenvectors().col(n - 1);
  if (es.eigenvalues()(n - 1) < std::abs(es.eigenvalues()(0)))
    v = es.eigenvectors().col(0);
  index_t imax = 0;
  for (index_t i = 1; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  if (std::abs(v[imax]) > 0.0) v *= std::abs(v[imax]) / v[imax];
  Tensor out({"c"}, {n});
  for (index_t i = 0; i < n; ++i) out.at({i}) = v[i];
  return out;
}

WilsonMpo build_wilson(const std::vector<IsoLayer>& layers) {
  if (layers.empty()) throw Error("build_wilson: empty layer stack");
  WilsonMpo w;
  w.gauge = layers.front().gate.gauge;
  w.phys = layers.front().o_prev.dim("l");
  const index_t n = static_cast<index_t>(layers.size());
  for (index_t s = 0; s < n; ++s) {
    const IsoLayer& L = layers[s];
    if (L.gate.gauge != w.gauge) throw Error("build_wilson: mixed gate gauges");
    if (L.gate.d != L.o_prev.dim("o"))
      throw Error("build_wilson: layer " + std::to_string(s + 1) + " gate consumes dimension " +
                  std::to_string(L.gate.d) + " but its site has operator dimension " +
                  std::to_string(L.o_prev.dim("o")));
    if (s > 0) {
      if (layers[s - 1].gate.dp != L.gate.d)
        throw Error("build_wilson: layer " + std::to_string(s) + " emits dimension " +
                    std::to_string(layers[s - 1].gate.dp) + " but layer " +
                    std::to_string(s + 1) + " consumes " + std::to_string(L.gate.d));
      if (layers[s - 1].w.dim("small") != L.o_prev.dim("l"))
        throw Error("build_wilson: bond mismatch between layers " + std::to_string(s) +
                    " and " + std::to_string(s + 1));
    }
    Tensor reducer = (s + 1 == n) ? sigma_reducer(L.sigma_r) : L.w;
    Tensor rung = rung_from(L.o_prev, L.gate, reducer, s == 0);
    if (s + 1 == n) {
      rung = fold_top_rung(std::move(rung));
      w.chis.push_back(L.gate.chi * L.gate.dp);
    } else {
      w.chis.push_back(L.gate.chi);
    }
    w.rungs.push_back(std::move(rung));
  }
  const IsoLayer& top = layers.back();
  w.cap = merge_legs(top.sigma_r, {"k", "m", "b"}, "c");
  w.cap_gap = top.tm_gap;
  if (w.cap_gap < 1e-3)
    warn("build_wilson: top fixed point nearly degenerate (gap " +
         std::to_string(w.cap_gap) + "); the infrared cutoff is ill-determined");
  return w;
}

WilsonContraction contract_to_umps(const WilsonMpo& w, index_t max_bond) {
  if (max_bond < 1) throw Error("contract_to_umps: max_bond must be positive");
  if (w.rungs.empty()) throw Error("contract_to_umps: empty Wilson MPO");
  const index_t n = static_cast<index_t>(w.rungs.size());
  WilsonContraction out;
  Tensor c;
  SvdOptions so;
  so.max_dim = max_bond;
  double kept = 1.0;
  for (index_t j = 0; j < n; ++j) {
    c = (j == 0) ? w.rungs[n - 1]
                 : contract(w.rungs[n - 1 - j],
                            c.renamed({{"pd", "pu"}, {"qd", "qu"}, {"md", "mu"}}),
                            {{"pu", "pu"}, {"qu", "qu"}, {"mu", "mu"}});
    const double before = sq(c.norm());
    if (!(before > 0.0)) throw Error("contract_to_umps: contraction vanished");
    const bool first = !c.has_leg("kacc");
    std::vector<std::string> rows = first ? std::vector<std::string>{"cl"}
                                          : std::vector<std::string>{"kacc", "cl"};
    SvdResult sv = svd_split(c, rows, so);
    Tensor u = sv.u;
    if (first) {
      // Insert the extent-1 running bond so every embed has legs (acc, cone, out).
      Tensor e({"acc", "cone", "out"}, {1, u.dim("cl"), u.dim("svd")});
      e.data() = u.permuted({"cl", "svd"}).data();
      out.embeds.push_back(e);
      c = contract(u.conjugated().renamed({{"svd", "knew"}}), c, {{"cl", "cl"}});
      c = contract(u.renamed({{"cl", "cr"}, {"svd", "bnew"}}), c, {{"cr", "cr"}});
    } else {
      out.embeds.push_back(
          u.renamed({{"kacc", "acc"}, {"cl", "cone"}, {"svd", "out"}}).permuted({"acc", "cone", "out"}));
      c = contract(u.conjugated().renamed({{"svd", "knew"}}), c,
                   {{"kacc", "kacc"}, {"cl", "cl"}});
      c = contract(u.renamed({{"kacc", "bacc"}, {"cl", "cr"}, {"svd", "bnew"}}), c,
                   {{"bacc", "bacc"}, {"cr", "cr"}});
    }
    c = c.renamed({{"knew", "kacc"}, {"bnew", "bacc"}});
    const double after = sq(c.norm());
    const double d = std::max(0.0, 1.0 - after / before);
    out.discarded.push_back(d);
    kept *= 1.0 - d;
    c *= cplx(1.0 / std::sqrt(after), 0.0);
  }
  out.total_discarded = 1.0 - kept;
  if (out.total_discarded > 1e-2)
    warn("contract_to_umps: cumulative discarded weight " +
         std::to_string(out.total_discarded) + " exceeds 1e-2");
  UniformMps m;
  m.a = c.renamed({{"kacc", "l"}, {"bacc", "r"}}).permuted({"l", "p", "r"});
  out.mps = normalize_and_fixed_points(std::move(m));
  return out;
}

namespace {

const std::map<std::string, std::string>& bra_suffix() {
  static const std::map<std::string, std::string> m = {
      {"cl", "clb"}, {"pd", "pdb"}, {"md", "mdb"}, {"qd", "qdb"},
      {"cr", "crb"}, {"pu", "pub"}, {"qu", "qub"}, {"mu", "mub"}};
  return m;
}

// Multiply singular values into vh along its bond (first leg).
Tensor scaled_vh(const SvdResult& sv, const std::string& bond) {
  Tensor t = sv.vh;
  int pos = t.leg_pos(bond);
  if (pos != 0) {
    std::vector<std::string> order = t.legs();
    std::swap(order[0], order[static_cast<size_t>(pos)]);
    t = t.permuted(order);
  }
  const index_t nb = t.dim(bond);
  const index_t block = t.size() / nb;
  for (index_t i = 0; i < nb; ++i)
    for (index_t j = 0; j < block; ++j) t.data()[static_cast<size_t>(i * block + j)] *= sv.s[static_cast<size_t>(i)];
  return t;
}

struct ZipOut {
  std::vector<Tensor> sites;  // legs (d, c, cb, u), left-canonical bottom-up
  cplx value{0.0, 0.0};       // scalar shed at the top
};

// One application of the doubled column to a scale-MPS iterate, recompressed
// bottom-up. in_k/in_b name the cone pair the iterate consumes, out_k/out_b
// the pair it emits (right fixed point: in cr/crb, out cl/clb).
ZipOut zip_apply(const WilsonMpo& w, const std::vector<Tensor>& sites,
                 const std::string& in_k, const std::string& in_b,
                 const std::string& out_k, const std::string& out_b,
                 index_t bond_cap) {
  const index_t n = static_cast<index_t>(w.rungs.size());
  ZipOut out;
  out.sites.reserve(static_cast<size_t>(n));
  SvdOptions so;
  so.max_dim = bond_cap;
  Tensor carry;  // legs (k, pu, qu, mu, pub, qub, mub, ru)
  for (index_t j = 0; j < n; ++j) {
    const Tensor& r = w.rungs[j];
    Tensor rb = r.conjugated().renamed(bra_suffix());
    Tensor t;
    if (j == 0) {
      t = contract(sites[0].renamed({{"d", "k"}}), r, {{"c", in_k}});
      t = contract(t, rb, {{"cb", in_b}, {"p", "p"}});
    } else {
      t = contract(carry, sites[static_cast<size_t>(j)], {{"ru", "d"}});
      t = contract(t, r, {{"pu", "pd"}, {"qu", "qd"}, {"mu", "md"}, {"c", in_k}});
      t = contract(t, rb, {{"pub", "pdb"}, {"qub", "qdb"}, {"mub", "mdb"}, {"cb", in_b}});
    }
    SvdResult sv = svd_split(t, {"k", out_k, out_b}, so);
    out.sites.push_back(
        sv.u.renamed({{"k", "d"}, {out_k, "c"}, {out_b, "cb"}, {"svd", "u"}})
            .permuted({"d", "c", "cb", "u"}));
    Tensor vhs = scaled_vh(sv, "svd");
    if (j == n - 1) {
      out.value = vhs.at({0, 0});  // legs (svd, u), both extent 1
    } else {
      carry = vhs.renamed({{"svd", "k"}, {"u", "ru"}});
    }
  }
  return out;
}

cplx scale_mps_overlap(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  Tensor e({"da", "db"}, {1, 1});
  e.at({0, 0}) = 1.0;
  for (size_t j = 0; j < a.size(); ++j) {
    Tensor t = contract(e, a[j].conjugated().renamed({{"d", "da"}, {"u", "ua"}}), {{"da", "da"}});
    t = contract(t, b[j].renamed({{"d", "db"}, {"u", "ub"}}),
                 {{"db", "db"}, {"c", "c"}, {"cb", "cb"}});
    e = t.renamed({{"ua", "da"}, {"ub", "db"}});
  }
  return e.at({0, 0});
}

struct PowerRun {
  std::vector<Tensor> sites;
  cplx value{0.0, 0.0};
  int iterations = 0;
  bool converged = false;
};

PowerRun scale_power_iteration(const WilsonMpo& w, bool right, const LayeredOptions& opts) {
  PowerRun run;
  for (index_t chi : w.chis) {
    Tensor s({"d", "c", "cb", "u"}, {1, chi, chi, 1});
    const double x = 1.0 / std::sqrt(static_cast<double>(chi));
    for (index_t i = 0; i < chi; ++i) s.at({0, i, i, 0}) = x;
    run.sites.push_back(s);
  }
  const std::string in_k = right ? "cr" : "cl", in_b = right ? "crb" : "clb";
  const std::string out_k = right ? "cl" : "cr", out_b = right ? "clb" : "crb";
  for (int it = 0; it < opts.max_iter; ++it) {
    ZipOut z = zip_apply(w, run.sites, in_k, in_b, out_k, out_b, opts.bond_cap);
    cplx ov = scale_mps_overlap(run.sites, z.sites);
    run.sites = std::move(z.sites);
    run.value = z.value;
    run.iterations = it + 1;
    if (it > 0 && 1.0 - std::abs(ov) < opts.tol) {
      run.converged = true;
      break;
    }
  }
  if (!run.converged)
    warn(std::string("layered_fixed_point: ") + (right ? "right" : "left") +
         " power iteration not converged after " + std::to_string(run.iterations) + " steps");
  return run;
}

// Map a converged scale-MPS onto the contracted bond through the kept-basis
// chain: the ket stack folds with plain embed entries on the right side and
// conjugated ones on the left (the bra stack mirrors), matching how the two
// bonds of the contracted site were compressed.
Tensor fold_to_bond(const std::vector<Tensor>& sites, const std::vector<Tensor>& embeds,
                    bool right) {
  const index_t n = static_cast<index_t>(sites.size());
  Tensor g({"ka", "ba", "rb"}, {1, 1, 1});
  g.at({0, 0, 0}) = 1.0;
  for (index_t jj = 0; jj < n; ++jj) {
    const Tensor& site = sites[static_cast<size_t>(n - 1 - jj)];
    const Tensor& e = embeds[static_cast<size_t>(jj)];
    Tensor ek = right ? e : e.conjugated();
    Tensor eb = right ? e.conjugated() : e;
    Tensor t = contract(g, site.renamed({{"u", "rb"}}), {{"rb", "rb"}});
    t = contract(t, ek.renamed({{"acc", "ka"}, {"cone", "c"}, {"out", "ko"}}),
                 {{"ka", "ka"}, {"c", "c"}});
    t = contract(t, eb.renamed({{"acc", "ba"}, {"cone", "cb"}, {"out", "bo"}}),
                 {{"ba", "ba"}, {"cb", "cb"}});
    g = t.renamed({{"d", "rb"}, {"ko", "ka"}, {"bo", "ba"}});
  }
  Tensor one({"rb"}, {1});
  one.at({0}) = 1.0;
  Tensor rho = contract(g, one, {{"rb", "rb"}})
                   .renamed({{"ka", "k"}, {"ba", "b"}})
                   .permuted({"k", "b"});
  Tensor adj = rho.conjugated().renamed({{"k", "b"}, {"b", "k"}});
  const double defect = (rho - adj).norm();
  if (defect > 1e-8 * std::max(1e-300, rho.norm()))
    warn("layered_fixed_point: mapped fixed point has Hermiticity defect " +
         std::to_string(defect / rho.norm()));
  rho = (rho + adj) * cplx(0.5, 0.0);
  Tensor id = Tensor::identity(rho.dim("k"), "k", "b");
  cplx tr = contract(rho, id, {{"k", "k"}, {"b", "b"}}).data()[0];
  if (std::abs(tr) > 1e-300) rho *= cplx(1.0, 0.0) / tr;
  return rho;
}

double bond_fidelity(const Tensor& a, const Tensor& b) {
  cplx ov = contract(a.conjugated(), b, {{"k", "k"}, {"b", "b"}}).data()[0];
  return std::abs(ov) / std::max(1e-300, a.norm() * b.norm());
}

}  // namespace

LayeredFixedPoint layered_fixed_point(const WilsonMpo& w, const WilsonContraction& c,
                                      const LayeredOptions& opts) {
  if (w.rungs.size() != c.embeds.size())
    throw Error("layered_fixed_point: contraction does not match the Wilson MPO");
  LayeredFixedPoint lf;
  PowerRun right = scale_power_iteration(w, true, opts);
  PowerRun left = scale_power_iteration(w, false, opts);
  lf.x = right.sites;
  for (const Tensor& t : lf.x) lf.x_inv.push_back(t.conjugated());
  lf.value_r = right.value;
  lf.value_l = left.value;
  lf.iterations_r = right.iterations;
  lf.iterations_l = left.iterations;
  lf.converged = right.converged && left.converged;
  lf.rho_r = fold_to_bond(right.sites, c.embeds, true);
  lf.rho_l = fold_to_bond(left.sites, c.embeds, false);
  if (c.mps.has_fixed_points()) {
    lf.fidelity_r = bond_fidelity(lf.rho_r, *c.mps.r);
    lf.fidelity_l = bond_fidelity(lf.rho_l, *c.mps.l);
  }
  return lf;
}

LayeredFixedPoint layered_fixed_point(const std::vector<IsoLayer>& layers, index_t max_bond,
                                      const LayeredOptions& opts) {
  WilsonMpo w = build_wilson(layers);
  WilsonContraction c = contract_to_umps(w, max_bond);
  return layered_fixed_point(w, c, opts);
}

std::vector<double> layer_distances(const std::vector<IsoLayer>& layers) {
  std::vector<double> out;
  for (size_t s = 0; s + 1 < layers.size(); ++s) {
    const Tensor& a = layers[s].o_coarse;
    const Tensor& b = layers[s + 1].o_coarse;
    if (a.dims() != b.dims() || a.legs() != b.legs()) {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    out.push_back((b - a).norm() / std::max(1e-300, a.norm()));
  }
  return out;
}

index_t pick_scale_invariant_layer(const std::vector<IsoLayer>& layers, double threshold) {
  std::vector<double> d = layer_distances(layers);
  if (d.empty()) {
    warn("pick_scale_invariant_layer: single-layer stack has no plateau");
    return 0;
  }
  index_t best = 0;
  for (size_t s = 1; s < d.size(); ++s)
    if (d[s] < d[static_cast<size_t>(best)]) best = static_cast<index_t>(s);
  if (d[static_cast<size_t>(best)] > threshold)
    warn("pick_scale_invariant_layer: no scale-invariant plateau (min distance " +
         std::to_string(d[static_cast<size_t>(best)]) + " exceeds " +
         std::to_string(threshold) + ")");
  return best;
}

std::vector<cplx> radial_superoperator(const Tensor& w_star, const Tensor& x_star) {
  for (const char* leg : {"cl", "pd", "md", "qd", "cr", "pu", "qu", "mu"})
    if (!w_star.has_leg(leg))
      throw Error("radial_superoperator: rung leg " + std::string(leg) + " missing");
  for (const char* pair : {"pd", "qd", "md"}) {
    std::string up = pair;
    up.back() = 'u';
    if (w_star.dim(pair) != w_star.dim(up))
      throw Error("radial_superoperator: rung is not scale invariant (" + std::string(pair) +
                  " extent " + std::to_string(w_star.dim(pair)) + " vs " + up + " " +
                  std::to_string(w_star.dim(up)) + ")");
  }
  for (const char* leg : {"d", "c", "cb", "u"})
    if (!x_star.has_leg(leg))
      throw Error("radial_superoperator: reducer leg " + std::string(leg) + " missing");
  if (x_star.dim("d") != x_star.dim("u"))
    throw Error("radial_superoperator: reducer is not an endomorphism (d extent " +
                std::to_string(x_star.dim("d")) + " vs u " + std::to_string(x_star.dim("u")) + ")");
  if (x_star.dim("c") != w_star.dim("cl") || x_star.dim("cb") != w_star.dim("cr"))
    throw Error("radial_superoperator: cone extents of rung and reducer differ");

  Tensor rc = trace_legs(trace_legs(trace_legs(w_star, "pd", "pu"), "qd", "qu"), "md", "mu");
  Tensor k = contract(rc, rc.conjugated().renamed({{"cl", "clb"}, {"cr", "crb"}}), {});
  Tensor a = contract(x_star.conjugated().renamed({{"c", "cl"}, {"cb", "clb"}}), k,
                      {{"cl", "cl"}, {"clb", "clb"}});
  Tensor f = contract(a, x_star.renamed({{"d", "d2"}, {"c", "cr"}, {"cb", "crb"}, {"u", "ub"}}),
                      {{"cr", "cr"}, {"crb", "crb"}});
  Eigen::MatrixXcd fm = as_matrix(f.permuted({"u", "ub", "d", "d2"}), {"u", "ub"});
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(fm);
  std::vector<cplx> vals(es.eigenvalues().data(), es.eigenvalues().data() + fm.rows());
  std::sort(vals.begin(), vals.end(),
            [](cplx x, cplx y) { return std::abs(x) > std::abs(y); });
  if (std::abs(vals.front()) < 1e-300) {
    warn("radial_superoperator: vanishing dominant eigenvalue, returning raw spectrum");
    return vals;
  }
  const cplx lead = vals.front();
  for (cplx& v : vals) v /= lead;
  return vals;
}

}  // namespace tmcg
