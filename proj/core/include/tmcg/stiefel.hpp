#pragma once

// Riemannian conjugate gradient ascent over isometries m (n x p complex,
// m^dag m = 1). Tangent projection z - m*herm(m^dag z) is orthogonal in the
// embedding inner product Re tr(x^dag y); steps retract through the polar
// factor, which is the manifold point nearest to m + t*d. Real inputs with
// real gradients stay real throughout, so the same code serves the orthogonal
// manifold.

#include <functional>

#include <Eigen/Dense>

#include "tmcg/tensor.hpp"

namespace tmcg {

// Orthogonal projection of z onto the tangent space at the isometry m.
Eigen::MatrixXcd stiefel_tangent(const Eigen::MatrixXcd& m, const Eigen::MatrixXcd& z);

// Unitary factor of the polar decomposition; requires full column rank.
Eigen::MatrixXcd polar_factor(const Eigen::MatrixXcd& m);

struct StiefelOptions {
  double tol = 1e-9;        // relative cost change between iterations
  int max_iter = 200;
  int restart_every = 20;   // drop conjugate-direction memory periodically
  double armijo_c = 1e-4;
  double step_init = 1.0;
  int max_backtrack = 40;
};

struct StiefelReport {
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;   // Riemannian gradient norm at the final iterate
};

// Maximizes cost(m) in place with Polak-Ribiere conjugate gradient and Armijo
// backtracking. egrad must return d cost / d conj(m); for cost functions that
// are real-valued this is the Euclidean ascent direction. Every accepted
// iterate is verified to satisfy m^dag m = 1 to 1e-10.
StiefelReport stiefel_maximize(Eigen::MatrixXcd& m,
                               const std::function<double(const Eigen::MatrixXcd&)>& cost,
                               const std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>& egrad,
                               const StiefelOptions& opts = {});

}  // namespace tmcg
