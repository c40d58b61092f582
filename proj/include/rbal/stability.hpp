#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rbal/bergman.hpp"
#include "rbal/symmetry.hpp"

namespace rbal {

// Pointwise split of the projective vector field xi_A into components tangent
// and normal to the embedded image, in the orthonormal frame zhat = C z.
// xi_A(p) = A zhat - (zhat^* A zhat / |zhat|^2) zhat, FS norm^2 = |.|^2/|zhat|^2.
struct TangentSplit {
    Eigen::MatrixXcd xi;          // npts x dim
    Eigen::MatrixXcd tangential;  // npts x n, chart coefficients X^a
    Eigen::MatrixXcd normal;      // npts x dim, pi_N xi
    Eigen::VectorXd norm2_xi;     // pointwise FS squared norms
    Eigen::VectorXd norm2_tan;
    Eigen::VectorXd norm2_norm;
    double l2_xi = 0.0;           // int ||.||^2 vol (L-level volume)
    double l2_tan = 0.0;
    double l2_norm = 0.0;
};

TangentSplit xi_split(const SectionFrame& frame, const InnerProduct& H,
                      const Eigen::MatrixXcd& A);
// moving-frame version, for geodesics C_t = e^{tA} C_0
TangentSplit xi_split_frame(const SectionFrame& frame, const Eigen::MatrixXcd& C,
                            const Eigen::MatrixXcd& A);

// Kempf-Ness profile along the geodesic whose orthonormal frame moves as
// C_t = e^{tA/2} C_0: fdot(t) = Re tr(A mu_bar_t), fddot(t) =
// int ||pi_N xi_A||^2 vol_t >= 0 and equals d/dt fdot; f by trapezoid
// integration of fdot outward from t = 0.
struct EnergyProfile {
    std::vector<double> t;
    std::vector<double> f;
    std::vector<double> f_dot;
    std::vector<double> f_ddot;
};

EnergyProfile f_derivatives(const SectionFrame& frame, const InnerProduct& H,
                            const Eigen::MatrixXcd& A, const std::vector<double>& t_grid);

// Empirical ratio scan over seeded random directions.
struct RatioReport {
    std::vector<double> ratios;  // one per accepted sample
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
    std::uint64_t seed = 0;
    int skipped = 0;  // samples that projected to (numerically) zero
};

// min over random A in V(T)-perp cap s_T of k^2 ||pi_N xi_A||^2_{L2} / tr(A^2)
RatioReport eigenvalue_bound_report(const SectionFrame& frame, const InnerProduct& H,
                                    const WeightDecomposition& wd,
                                    const std::vector<HermitianDirection>& basisVT,
                                    int samples, std::uint64_t seed = 1);

// max over random traceless Hermitian A of tr(A^2) / (k ||xi_A||^2_{L2})
RatioReport norm_bound_report(const SectionFrame& frame, const InnerProduct& H,
                              int samples, std::uint64_t seed = 1);

// C^0/C^2 equivalence constants of the pulled-back form against k times a
// reference L-level form: pointwise generalized eigenvalue extremes, so
// omega_tilde >= R_lower * (k omega_0) and <= R_upper * (k omega_0).
struct DistortionReport {
    double R_lower = 0.0;
    double R_upper = 0.0;
    double c0 = 0.0;      // max(R_upper - 1, 1 - R_lower)
    double c2 = 0.0;      // stencil estimate on the entrywise difference
    double r_gate = 0.0;
    bool gate_passed = false;
};

DistortionReport distortion_report(const SectionFrame& frame, const InnerProduct& H,
                                   const KahlerData& reference_kd, double r_gate = 20.0);

// Certified linear-growth direction at a relatively balanced configuration:
// A = P_{V(T)}(P_{s_T}(mu_bar - cI)), fdot constant = tr(A^2) along e^{tA}.
struct Destabilizer {
    Eigen::MatrixXcd A;
    double slope = 0.0;          // tr(A^2)
    double fit_residual = 0.0;   // max |fdot(t) - slope| over samples
    std::vector<double> t_samples;
    std::vector<double> f_dot_samples;
};

std::optional<Destabilizer> destabilizer_scan(const SectionFrame& frame,
                                              const InnerProduct& H,
                                              const WeightDecomposition& wd,
                                              const std::vector<HermitianDirection>& basisVT,
                                              int budget);

}  // namespace rbal
