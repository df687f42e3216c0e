#include "tmcg/stiefel.hpp"

#include <cmath>

namespace tmcg {

namespace {

double inner(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  return (x.adjoint() * y).trace().real();
}

}  // namespace

Eigen::MatrixXcd stiefel_tangent(const Eigen::MatrixXcd& m, const Eigen::MatrixXcd& z) {
  Eigen::MatrixXcd mz = m.adjoint() * z;
  return z - m * (0.5 * (mz + mz.adjoint()));
}

Eigen::MatrixXcd polar_factor(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-14 * s(0))
    throw Error("polar_factor: rank-deficient input");
  return svd.matrixU() * svd.matrixV().adjoint();
}

StiefelReport stiefel_maximize(Eigen::MatrixXcd& m,
                               const std::function<double(const Eigen::MatrixXcd&)>& cost,
                               const std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>& egrad,
                               const StiefelOptions& opts) {
  const index_t p = m.cols();
  auto check_isometry = [&](const Eigen::MatrixXcd& x) {
    double defect = (x.adjoint() * x - Eigen::MatrixXcd::Identity(p, p)).norm();
    if (defect > 1e-10) throw Error("stiefel_maximize: iterate left the manifold");
  };
  check_isometry(m);

  StiefelReport rep;
  rep.cost = cost(m);
  Eigen::MatrixXcd grad = stiefel_tangent(m, egrad(m));
  Eigen::MatrixXcd dir = grad;
  double gg = inner(grad, grad);
  double step = opts.step_init;
  int small_streak = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    rep.grad_norm = std::sqrt(std::max(0.0, gg));
    if (rep.grad_norm < 1e-14 * std::max(1.0, std::abs(rep.cost))) {
      rep.converged = true;
      break;
    }
    double slope = 2.0 * inner(grad, dir);
    if (slope <= 0.0) {  // stale conjugate memory; fall back to steepest ascent
      dir = grad;
      slope = 2.0 * gg;
    }

    // Armijo backtracking along the polar retraction.
    double t = step;
    Eigen::MatrixXcd m_new;
    double c_new = rep.cost;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtrack; ++bt) {
      m_new = polar_factor(m + t * dir);
      c_new = cost(m_new);
      if (c_new >= rep.cost + opts.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) break;
    check_isometry(m_new);
    step = 2.0 * t;  // let the step grow back after backtracks

    Eigen::MatrixXcd grad_new = stiefel_tangent(m_new, egrad(m_new));
    double gg_new = inner(grad_new, grad_new);
    // Polak-Ribiere+ with transported previous gradient and direction.
    Eigen::MatrixXcd grad_old_t = stiefel_tangent(m_new, grad);
    double beta = 0.0;
    if (gg > 0.0 && (it + 1) % opts.restart_every != 0)
      beta = std::max(0.0, inner(grad_new, grad_new - grad_old_t) / gg);
    dir = grad_new + beta * stiefel_tangent(m_new, dir);

    bool small_change = std::abs(c_new - rep.cost) <= opts.tol * std::max(1.0, std::abs(c_new));
    m = m_new;
    rep.cost = c_new;
    grad = grad_new;
    gg = gg_new;
    // A single sub-tolerance step can be a plateau artifact of the zigzag;
    // declare convergence only after three in a row.
    small_streak = small_change ? small_streak + 1 : 0;
    if (small_streak >= 3) {
      rep.converged = true;
      rep.grad_norm = std::sqrt(std::max(0.0, gg));
      break;
    }
  }
  return rep;
}

}  // namespace tmcg
