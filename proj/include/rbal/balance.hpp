#pragma once

#include <string>
#include <vector>

#include "rbal/bergman.hpp"
#include "rbal/symmetry.hpp"

namespace rbal {

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 2000;
    std::string mode = "titer";  // "titer" or "descent"
};

struct ResidualSample {
    int iteration = 0;
    double balanced = 0.0;
    double relative = 0.0;
};

struct SolveReport {
    int iterates = 0;
    std::vector<ResidualSample> residual_history;
    InnerProduct final_H;
    Eigen::MatrixXcd B_matrix;  // V(T) component of mu_bar - cI at the end
    std::string status;         // converged / max-iter / diverged
};

// ||mu_bar - c I||_F / ||mu_bar||_F
double balanced_residual(const MomentData& md);

// first: ||P_{V(T)perp}(P_{s_T}(mu_bar - cI))||_F / ||mu_bar||_F;
// second: off-s_T residual ||(mu_bar - cI) - P_{s_T}(mu_bar - cI)||_F / ||mu_bar||_F
std::pair<double, double> relative_residual(const MomentData& md,
                                            const WeightDecomposition& wd,
                                            const std::vector<HermitianDirection>& basisVT);

SolveReport solve_balanced(const SectionFrame& frame, const InnerProduct& H0,
                           const SolveOptions& opts);

SolveReport solve_relative(const SectionFrame& frame, const InnerProduct& H0,
                           const WeightDecomposition& wd,
                           const std::vector<HermitianDirection>& basisVT,
                           const SolveOptions& opts);

// torus translate of an inner product: H -> e^{-D} H e^{-D} with
// D = sum_i t_i A_i (diagonal weight matrices)
InnerProduct torus_translate(const InnerProduct& H, const std::vector<HermitianDirection>& basisVT,
                             const Eigen::VectorXd& t);

// match H1 to H2 modulo the complexified torus: minimizes over t the distance
// between the sorted mu_bar spectra
std::pair<Eigen::VectorXd, double> orbit_match(const SectionFrame& frame,
                                               const InnerProduct& H1, const InnerProduct& H2,
                                               const std::vector<HermitianDirection>& basisVT);

}  // namespace rbal
