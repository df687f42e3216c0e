#include "tmcg/tensor.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace tmcg {

namespace {
std::function<void(const std::string&)> g_warning_sink =
    [](const std::string& msg) { std::cerr << "[tmcg] " << msg << "\n"; };
}

void set_warning_sink(std::function<void(const std::string&)> sink) {
  g_warning_sink = std::move(sink);
}

void warn(const std::string& msg) {
  if (g_warning_sink) g_warning_sink(msg);
}

Tensor::Tensor(std::vector<std::string> legs, std::vector<index_t> dims)
    : legs_(std::move(legs)), dims_(std::move(dims)) {
  if (legs_.size() != dims_.size()) throw Error("tensor: legs/dims size mismatch");
  for (size_t i = 0; i < legs_.size(); ++i) {
    if (dims_[i] <= 0) throw Error("tensor: nonpositive dimension for leg " + legs_[i]);
    for (size_t j = i + 1; j < legs_.size(); ++j)
      if (legs_[i] == legs_[j]) throw Error("tensor: duplicate leg " + legs_[i]);
  }
  data_.assign(static_cast<size_t>(size()), cplx(0.0, 0.0));
}

Tensor Tensor::zeros(std::vector<std::string> legs, std::vector<index_t> dims) {
  return Tensor(std::move(legs), std::move(dims));
}

Tensor Tensor::identity(index_t n, const std::string& row, const std::string& col) {
  Tensor t({row, col}, {n, n});
  for (index_t i = 0; i < n; ++i) t.data_[static_cast<size_t>(i * n + i)] = 1.0;
  return t;
}

index_t Tensor::size() const {
  index_t s = 1;
  for (index_t d : dims_) s *= d;
  return s;
}

index_t Tensor::dim(const std::string& leg) const {
  int p = leg_pos(leg);
  if (p < 0) throw Error("tensor: no leg named " + leg);
  return dims_[static_cast<size_t>(p)];
}

int Tensor::leg_pos(const std::string& leg) const {
  for (size_t i = 0; i < legs_.size(); ++i)
    if (legs_[i] == leg) return static_cast<int>(i);
  return -1;
}

cplx& Tensor::at(const std::vector<index_t>& idx) {
  return const_cast<cplx&>(static_cast<const Tensor*>(this)->at(idx));
}

const cplx& Tensor::at(const std::vector<index_t>& idx) const {
  if (idx.size() != dims_.size()) throw Error("tensor: index rank mismatch");
  index_t off = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= dims_[i]) throw Error("tensor: index out of range");
    off = off * dims_[i] + idx[i];
  }
  return data_[static_cast<size_t>(off)];
}

namespace {

std::vector<index_t> row_major_strides(const std::vector<index_t>& dims) {
  std::vector<index_t> st(dims.size(), 1);
  for (size_t i = dims.size(); i-- > 1;) st[i - 1] = st[i] * dims[i];
  return st;
}

}  // namespace

Tensor Tensor::permuted(const std::vector<std::string>& order) const {
  if (order.size() != legs_.size()) throw Error("permute: wrong number of legs");
  std::vector<int> src(order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    int p = leg_pos(order[i]);
    if (p < 0) throw Error("permute: no leg named " + order[i]);
    src[i] = p;
  }
  std::vector<index_t> ndims(order.size());
  for (size_t i = 0; i < order.size(); ++i) ndims[i] = dims_[static_cast<size_t>(src[i])];
  Tensor out(std::vector<std::string>(order), ndims);

  const auto old_st = row_major_strides(dims_);
  const size_t r = order.size();
  std::vector<index_t> stride_in_new(r);  // stride in source data when new index i increments
  for (size_t i = 0; i < r; ++i) stride_in_new[i] = old_st[static_cast<size_t>(src[i])];

  std::vector<index_t> idx(r, 0);
  const size_t total = static_cast<size_t>(size());
  index_t src_off = 0;
  for (size_t lin = 0; lin < total; ++lin) {
    out.data_[lin] = data_[static_cast<size_t>(src_off)];
    for (size_t i = r; i-- > 0;) {
      ++idx[i];
      src_off += stride_in_new[i];
      if (idx[i] < ndims[i]) break;
      src_off -= stride_in_new[i] * ndims[i];
      idx[i] = 0;
    }
  }
  return out;
}

Tensor Tensor::renamed(const std::string& from, const std::string& to) const {
  return renamed(std::map<std::string, std::string>{{from, to}});
}

Tensor Tensor::renamed(const std::map<std::string, std::string>& repl) const {
  Tensor t = *this;
  for (auto& leg : t.legs_) {
    auto it = repl.find(leg);
    if (it != repl.end()) leg = it->second;
  }
  for (size_t i = 0; i < t.legs_.size(); ++i)
    for (size_t j = i + 1; j < t.legs_.size(); ++j)
      if (t.legs_[i] == t.legs_[j]) throw Error("rename: duplicate leg " + t.legs_[i]);
  return t;
}

Tensor Tensor::conjugated() const {
  Tensor t = *this;
  for (auto& v : t.data_) v = std::conj(v);
  return t;
}

double Tensor::norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor& Tensor::operator*=(cplx a) {
  for (auto& v : data_) v *= a;
  return *this;
}

Tensor Tensor::operator*(cplx a) const {
  Tensor t = *this;
  t *= a;
  return t;
}

Tensor Tensor::operator+(const Tensor& other) const {
  Tensor rhs = other.permuted(legs_);
  if (rhs.dims() != dims_) throw Error("add: dimension mismatch");
  Tensor t = *this;
  for (size_t i = 0; i < t.data_.size(); ++i) t.data_[i] += rhs.data_[i];
  return t;
}

Tensor Tensor::operator-(const Tensor& other) const {
  return *this + other * cplx(-1.0, 0.0);
}

Tensor contract(const Tensor& a, const Tensor& b,
                const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<std::string> a_con, b_con;
  for (const auto& [la, lb] : pairs) {
    if (a.dim(la) != b.dim(lb))
      throw Error("contract: dimension mismatch on " + la + " vs " + lb);
    a_con.push_back(la);
    b_con.push_back(lb);
  }
  auto is_in = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  std::vector<std::string> a_free, b_free;
  for (const auto& l : a.legs())
    if (!is_in(a_con, l)) a_free.push_back(l);
  for (const auto& l : b.legs())
    if (!is_in(b_con, l)) b_free.push_back(l);

  std::vector<std::string> a_order = a_free;
  a_order.insert(a_order.end(), a_con.begin(), a_con.end());
  std::vector<std::string> b_order = b_con;
  b_order.insert(b_order.end(), b_free.begin(), b_free.end());

  Tensor ap = a.permuted(a_order);
  Tensor bp = b.permuted(b_order);

  index_t m = 1, k = 1, n = 1;
  std::vector<index_t> out_dims;
  std::vector<std::string> out_legs;
  for (const auto& l : a_free) {
    out_legs.push_back(l);
    out_dims.push_back(a.dim(l));
    m *= a.dim(l);
  }
  for (const auto& l : a_con) k *= a.dim(l);
  for (const auto& l : b_free) {
    out_legs.push_back(l);
    out_dims.push_back(b.dim(l));
    n *= b.dim(l);
  }
  for (size_t i = 0; i < out_legs.size(); ++i)
    for (size_t j = i + 1; j < out_legs.size(); ++j)
      if (out_legs[i] == out_legs[j])
        throw Error("contract: duplicate free leg " + out_legs[i] + "; rename first");

  // Row-major data viewed as column-major transposed matrices: compute
  // C^T = B^T * A^T so the result is row-major over (a_free, b_free).
  using MatCM = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  Eigen::Map<const MatCM> Amap(ap.data().data(), k, m);   // A^T: k x m
  Eigen::Map<const MatCM> Bmap(bp.data().data(), n, k);   // B^T: n x k
  Tensor out(out_legs, out_dims);
  Eigen::Map<MatCM> Cmap(out.data().data(), n, m);
  Cmap.noalias() = Bmap * Amap;
  return out;
}

Tensor trace_legs(const Tensor& t, const std::string& l1, const std::string& l2) {
  if (t.dim(l1) != t.dim(l2)) throw Error("trace: dimension mismatch");
  std::vector<std::string> order;
  std::vector<std::string> free;
  for (const auto& l : t.legs())
    if (l != l1 && l != l2) free.push_back(l);
  order = free;
  order.push_back(l1);
  order.push_back(l2);
  Tensor tp = t.permuted(order);
  std::vector<index_t> fdims;
  index_t f = 1;
  for (const auto& l : free) {
    fdims.push_back(t.dim(l));
    f *= t.dim(l);
  }
  const index_t d = t.dim(l1);
  Tensor out(free, fdims);
  if (free.empty()) out = Tensor({"scalar"}, {1});  // rank-0 guard
  auto& od = out.data();
  const auto& id = tp.data();
  for (index_t i = 0; i < f; ++i) {
    cplx s = 0.0;
    for (index_t j = 0; j < d; ++j) s += id[static_cast<size_t>((i * d + j) * d + j)];
    od[static_cast<size_t>(i)] = s;
  }
  return out;
}

Tensor merge_legs(const Tensor& t, const std::vector<std::string>& group,
                  const std::string& merged) {
  std::vector<std::string> order;
  int insert_at = -1;
  for (const auto& l : t.legs()) {
    bool in_group = std::find(group.begin(), group.end(), l) != group.end();
    if (!in_group) order.push_back(l);
  }
  insert_at = static_cast<int>(order.size());
  // keep merged leg at the position of the first grouped leg
  for (size_t i = 0; i < t.legs().size(); ++i) {
    if (std::find(group.begin(), group.end(), t.legs()[i]) != group.end()) {
      int before = 0;
      for (size_t j = 0; j < i; ++j)
        if (std::find(group.begin(), group.end(), t.legs()[j]) == group.end()) ++before;
      insert_at = before;
      break;
    }
  }
  std::vector<std::string> perm(order.begin(), order.begin() + insert_at);
  perm.insert(perm.end(), group.begin(), group.end());
  perm.insert(perm.end(), order.begin() + insert_at, order.end());
  Tensor tp = t.permuted(perm);

  std::vector<std::string> nlegs;
  std::vector<index_t> ndims;
  index_t md = 1;
  for (const auto& g : group) md *= t.dim(g);
  for (int i = 0; i < insert_at; ++i) {
    nlegs.push_back(order[static_cast<size_t>(i)]);
    ndims.push_back(t.dim(order[static_cast<size_t>(i)]));
  }
  nlegs.push_back(merged);
  ndims.push_back(md);
  for (size_t i = static_cast<size_t>(insert_at); i < order.size(); ++i) {
    nlegs.push_back(order[i]);
    ndims.push_back(t.dim(order[i]));
  }
  Tensor out(nlegs, ndims);
  out.data() = tp.data();
  return out;
}

Tensor split_leg(const Tensor& t, const std::string& leg,
                 const std::vector<std::string>& parts,
                 const std::vector<index_t>& part_dims) {
  index_t prod = 1;
  for (index_t d : part_dims) prod *= d;
  if (prod != t.dim(leg)) throw Error("split: part dims do not factor " + leg);
  int p = t.leg_pos(leg);
  std::vector<std::string> nlegs;
  std::vector<index_t> ndims;
  for (size_t i = 0; i < t.legs().size(); ++i) {
    if (static_cast<int>(i) == p) {
      for (size_t j = 0; j < parts.size(); ++j) {
        nlegs.push_back(parts[j]);
        ndims.push_back(part_dims[j]);
      }
    } else {
      nlegs.push_back(t.legs()[i]);
      ndims.push_back(t.dims()[i]);
    }
  }
  Tensor out(nlegs, ndims);
  out.data() = t.data();
  return out;
}

Eigen::MatrixXcd as_matrix(const Tensor& t, const std::vector<std::string>& row_legs) {
  std::vector<std::string> cols;
  for (const auto& l : t.legs())
    if (std::find(row_legs.begin(), row_legs.end(), l) == row_legs.end()) cols.push_back(l);
  std::vector<std::string> order = row_legs;
  order.insert(order.end(), cols.begin(), cols.end());
  Tensor tp = t.permuted(order);
  index_t m = 1, n = 1;
  for (const auto& l : row_legs) m *= t.dim(l);
  for (const auto& l : cols) n *= t.dim(l);
  using MatRM = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const MatRM> map(tp.data().data(), m, n);
  return map;
}

Tensor from_matrix(const Eigen::MatrixXcd& m,
                   const std::vector<std::string>& row_legs, const std::vector<index_t>& row_dims,
                   const std::vector<std::string>& col_legs, const std::vector<index_t>& col_dims) {
  index_t rm = 1, cn = 1;
  for (index_t d : row_dims) rm *= d;
  for (index_t d : col_dims) cn *= d;
  if (rm != m.rows() || cn != m.cols()) throw Error("from_matrix: shape mismatch");
  std::vector<std::string> legs = row_legs;
  legs.insert(legs.end(), col_legs.begin(), col_legs.end());
  std::vector<index_t> dims = row_dims;
  dims.insert(dims.end(), col_dims.begin(), col_dims.end());
  Tensor out(legs, dims);
  using MatRM = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<MatRM>(out.data().data(), rm, cn) = m;
  return out;
}

SvdResult svd_split(const Tensor& t, const std::vector<std::string>& row_legs,
                    const SvdOptions& opts) {
  std::vector<std::string> cols;
  for (const auto& l : t.legs())
    if (std::find(row_legs.begin(), row_legs.end(), l) == row_legs.end()) cols.push_back(l);
  Eigen::MatrixXcd m = as_matrix(t, row_legs);

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  Eigen::MatrixXcd u = svd.matrixU();
  Eigen::MatrixXcd v = svd.matrixV();

  const index_t full = s.size();
  double total = 0.0;
  for (index_t i = 0; i < full; ++i) total += s[i] * s[i];

  index_t keep = full;
  if (opts.rel_tol > 0.0 && full > 0) {
    const double cut = opts.rel_tol * s[0];
    keep = 0;
    while (keep < full && s[keep] > cut) ++keep;
  }
  bool degeneracy_warning = false;
  if (opts.max_dim >= 0 && keep > opts.max_dim) {
    index_t k = opts.max_dim;
    if (k > 0 && k < full) {
      // boundary multiplet: contiguous run of near-equal values straddling k
      index_t lo = k, hi = k;
      const double ref = s[k - 1];
      while (lo > 0 && std::abs(s[lo - 1] - ref) <= opts.degeneracy_rtol * std::max(ref, 1e-300)) --lo;
      while (hi < full && std::abs(s[hi] - ref) <= opts.degeneracy_rtol * std::max(ref, 1e-300)) ++hi;
      if (hi > k && lo < k) {
        const index_t mult = hi - lo;
        if (hi <= opts.max_dim + mult) {
          keep = hi;  // keep the whole multiplet
        } else {
          keep = k;
          warn("svd_split: truncating inside a degenerate multiplet (index-order cut)");
        }
        degeneracy_warning = true;
      } else {
        keep = k;
      }
    } else {
      keep = k;
    }
  }
  if (keep == 0) keep = std::min<index_t>(1, full);

  double kept = 0.0;
  for (index_t i = 0; i < keep; ++i) kept += s[i] * s[i];
  double discarded = total > 0.0 ? std::max(0.0, (total - kept) / total) : 0.0;

  u.conservativeResize(Eigen::NoChange, keep);
  v.conservativeResize(Eigen::NoChange, keep);
  // deterministic phases: largest-modulus entry of each u column real positive
  for (index_t c = 0; c < keep; ++c) {
    index_t arg = 0;
    double best = -1.0;
    for (index_t r = 0; r < u.rows(); ++r) {
      double a = std::abs(u(r, c));
      if (a > best + 1e-15) {
        best = a;
        arg = r;
      }
    }
    cplx ph = u(arg, c);
    if (std::abs(ph) > 0) {
      // the same phase on both factors cancels in u * s * vh
      cplx rot = std::conj(ph) / std::abs(ph);
      u.col(c) *= rot;
      v.col(c) *= rot;
    }
  }

  std::vector<index_t> row_dims, col_dims;
  for (const auto& l : row_legs) row_dims.push_back(t.dim(l));
  for (const auto& l : cols) col_dims.push_back(t.dim(l));

  SvdResult out;
  out.u = from_matrix(u, row_legs, row_dims, {opts.bond}, {keep});
  out.vh = from_matrix(v.adjoint(), {opts.bond}, {keep}, cols, col_dims);
  out.s.assign(s.data(), s.data() + keep);
  out.discarded_weight = discarded;
  out.degeneracy_warning = degeneracy_warning;
  return out;
}

void fix_phase(Eigen::VectorXcd& v) {
  index_t arg = 0;
  double best = -1.0;
  for (index_t i = 0; i < v.size(); ++i) {
    double a = std::abs(v[i]);
    if (a > best + 1e-15) {
      best = a;
      arg = i;
    }
  }
  if (best > 0) {
    cplx ph = v[arg];
    v *= std::conj(ph) / std::abs(ph);
  }
}

EigResult eig_dominant(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                       index_t n, const EigOptions& opts) {
  EigResult res;
  const int m = std::min<index_t>(opts.krylov, n);
  Eigen::VectorXcd v;
  if (opts.v0.size() == n && opts.v0.norm() > 0) {
    v = opts.v0 / opts.v0.norm();
  } else {
    // deterministic start independent of any global RNG
    v = Eigen::VectorXcd(n);
    std::mt19937_64 eng(0x5eed5eedULL);
    std::normal_distribution<double> g;
    for (index_t i = 0; i < n; ++i) v[i] = cplx(g(eng), g(eng));
    v /= v.norm();
  }

  int total_iter = 0;
  while (total_iter < opts.max_iter) {
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    V.col(0) = v;
    int built = m;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXcd w = apply(V.col(j));
      ++total_iter;
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      // one re-orthogonalization pass keeps the basis clean
      for (int i = 0; i <= j; ++i) {
        cplx c = V.col(i).dot(w);
        H(i, j) += c;
        w -= c * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (std::abs(H(j + 1, j)) < 1e-14) {
        built = j + 1;
        break;
      }
      V.col(j + 1) = w / H(j + 1, j);
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(built, built));
    index_t arg = 0;
    double best = -1.0, second = -1.0;
    for (index_t i = 0; i < built; ++i) {
      double a = std::abs(es.eigenvalues()[i]);
      if (a > best) {
        second = best;
        best = a;
        arg = i;
      } else if (a > second) {
        second = a;
      }
    }
    Eigen::VectorXcd y = es.eigenvectors().col(arg);
    Eigen::VectorXcd x = V.leftCols(built) * y;
    x /= x.norm();
    cplx lambda = es.eigenvalues()[arg];
    double resid = (apply(x) - lambda * x).norm() / std::max(1e-300, std::abs(lambda));
    res.value = lambda;
    res.vector = x;
    res.residual = resid;
    res.iterations = total_iter;
    res.gap_ratio = best > 0 && second >= 0 ? second / best : 0.0;
    if (resid < opts.tol) {
      res.converged = true;
      break;
    }
    v = x;
    if (built < m) break;  // invariant subspace found; cannot improve further
  }
  if (!res.converged && res.residual > std::sqrt(opts.tol))
    warn("eig_dominant: not converged, residual " + std::to_string(res.residual));
  if (res.gap_ratio > 1.0 - 1e-10)
    warn("eig_dominant: (near-)degenerate dominant eigenvalue, gap ratio " +
         std::to_string(res.gap_ratio));
  fix_phase(res.vector);
  return res;
}

EigResult eig_dominant(const Eigen::MatrixXcd& m, const EigOptions& opts) {
  return eig_dominant(
      [&m](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return m * x; },
      m.rows(), opts);
}

HermEigResult eig_all_hermitian(const Eigen::MatrixXcd& m, double herm_tol) {
  double defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
  double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if (defect > herm_tol * scale)
    throw Error("eig_all_hermitian: matrix is not Hermitian (defect " +
                std::to_string(defect / scale) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
  const index_t n = m.rows();
  HermEigResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (index_t i = 0; i < n; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    Eigen::VectorXcd v = es.eigenvectors().col(n - 1 - i);
    fix_phase(v);
    out.vectors.col(i) = v;
  }
  return out;
}

Tensor random_gaussian(std::vector<std::string> legs, std::vector<index_t> dims,
                       std::uint64_t seed) {
  Tensor t(std::move(legs), std::move(dims));
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> g;
  for (auto& v : t.data()) v = cplx(g(eng), g(eng));
  return t;
}

}  // namespace tmcg
