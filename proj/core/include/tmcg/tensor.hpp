#pragma once

// Dense complex tensors with named legs.
//
// Storage is row-major over the current leg order: the last leg runs fastest.
// All reshapes that merge legs do so in the order the legs are listed, so a
// merged index decomposes as i = i1*(d2*d3...) + i2*(d3...) + ... Every
// contraction in this library is expressed through named legs; positional
// conventions for composite objects (gates, MPO tensors) are documented where
// those objects are defined.

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tmcg {

using cplx = std::complex<double>;
using index_t = std::int64_t;

// Hook for non-fatal diagnostics (degeneracy warnings, slow convergence, ...).
// Default sink writes to stderr; tests may capture or silence it.
void set_warning_sink(std::function<void(const std::string&)> sink);
void warn(const std::string& msg);

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::string> legs, std::vector<index_t> dims);

  static Tensor zeros(std::vector<std::string> legs, std::vector<index_t> dims);
  // Matrix identity delta(row, col) with dimension n.
  static Tensor identity(index_t n, const std::string& row, const std::string& col);

  index_t rank() const { return static_cast<index_t>(dims_.size()); }
  index_t size() const;
  const std::vector<std::string>& legs() const { return legs_; }
  const std::vector<index_t>& dims() const { return dims_; }
  index_t dim(const std::string& leg) const;
  int leg_pos(const std::string& leg) const;       // -1 when absent
  bool has_leg(const std::string& leg) const { return leg_pos(leg) >= 0; }

  std::vector<cplx>& data() { return data_; }
  const std::vector<cplx>& data() const { return data_; }
  cplx& at(const std::vector<index_t>& idx);
  const cplx& at(const std::vector<index_t>& idx) const;

  Tensor permuted(const std::vector<std::string>& order) const;
  Tensor renamed(const std::string& from, const std::string& to) const;
  Tensor renamed(const std::map<std::string, std::string>& repl) const;
  Tensor conjugated() const;
  double norm() const;
  double max_abs() const;

  Tensor& operator*=(cplx a);
  Tensor operator*(cplx a) const;
  Tensor operator+(const Tensor& other) const;  // other may be a leg permutation
  Tensor operator-(const Tensor& other) const;

 private:
  std::vector<std::string> legs_;
  std::vector<index_t> dims_;
  std::vector<cplx> data_;
};

// Pairwise contraction: sums over pairs.first (in a) against pairs.second (in
// b). Result legs: free legs of a (original order), then free legs of b.
Tensor contract(const Tensor& a, const Tensor& b,
                const std::vector<std::pair<std::string, std::string>>& pairs);

// Partial trace over two equal-dimension legs of one tensor.
Tensor trace_legs(const Tensor& t, const std::string& l1, const std::string& l2);

// Merge consecutive-in-listed-order legs into one (row-major); inverse split.
Tensor merge_legs(const Tensor& t, const std::vector<std::string>& group,
                  const std::string& merged);
Tensor split_leg(const Tensor& t, const std::string& leg,
                 const std::vector<std::string>& parts,
                 const std::vector<index_t>& part_dims);

// Matricization: rows = row_legs merged (listed order), cols = remaining legs
// in their current order.
Eigen::MatrixXcd as_matrix(const Tensor& t, const std::vector<std::string>& row_legs);
Tensor from_matrix(const Eigen::MatrixXcd& m,
                   const std::vector<std::string>& row_legs, const std::vector<index_t>& row_dims,
                   const std::vector<std::string>& col_legs, const std::vector<index_t>& col_dims);

struct SvdOptions {
  index_t max_dim = -1;       // -1: keep everything above tol
  double rel_tol = 0.0;       // discard s[k] < rel_tol * s[0]
  double degeneracy_rtol = 1e-8;
  std::string bond = "svd";
};

struct SvdResult {
  Tensor u;                   // row legs + bond; isometric on merged rows
  std::vector<double> s;      // descending
  Tensor vh;                  // bond + col legs
  double discarded_weight = 0.0;  // sum of discarded s^2 over total sum s^2
  bool degeneracy_warning = false;
};

// Split t across (row_legs | rest). Truncation keeps a degenerate multiplet
// intact when the whole multiplet fits within max_dim plus its multiplicity;
// otherwise it cuts at max_dim in index order and emits a warning. Singular
// vector phases are fixed so the largest-modulus entry of each u column is
// real positive.
SvdResult svd_split(const Tensor& t, const std::vector<std::string>& row_legs,
                    const SvdOptions& opts = {});

struct EigOptions {
  double tol = 1e-13;
  int max_iter = 2000;
  int krylov = 30;
  Eigen::VectorXcd v0;        // optional warm start
};

struct EigResult {
  cplx value{0.0, 0.0};
  Eigen::VectorXcd vector;    // phase: largest-modulus entry real positive
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double gap_ratio = 0.0;     // |lambda_2| / |lambda_1| estimate from the Krylov space
};

// Dominant (largest |lambda|) eigenpair of a matrix-free linear map via
// restarted Arnoldi. Flags near-degenerate dominant eigenvalues through the
// warning sink.
EigResult eig_dominant(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                       index_t n, const EigOptions& opts = {});
EigResult eig_dominant(const Eigen::MatrixXcd& m, const EigOptions& opts = {});

struct HermEigResult {
  Eigen::VectorXd values;     // descending
  Eigen::MatrixXcd vectors;   // columns match values
};

// Full spectrum of a Hermitian matrix; throws when the Hermiticity defect
// exceeds herm_tol * max_abs.
HermEigResult eig_all_hermitian(const Eigen::MatrixXcd& m, double herm_tol = 1e-10);

// Phase-fix helper shared by eigen routines: rotate v so its largest-modulus
// entry (first such index on ties) is real positive.
void fix_phase(Eigen::VectorXcd& v);

// Deterministic standard-normal complex tensor from the given engine.
Tensor random_gaussian(std::vector<std::string> legs, std::vector<index_t> dims,
                       std::uint64_t seed);

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tmcg
