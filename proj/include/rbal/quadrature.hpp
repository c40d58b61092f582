#pragma once

#include <vector>

#include <Eigen/Dense>

namespace rbal {

// Gauss-Legendre nodes and weights on (-1, 1).
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// Fornberg finite-difference weights: given stencil nodes x[0..m-1] and an
// evaluation point x0, returns an (order+1) x m matrix whose row d holds the
// weights of the d-th derivative.
Eigen::MatrixXd fornberg_weights(double x0, const std::vector<double>& x, int max_order);

}  // namespace rbal
