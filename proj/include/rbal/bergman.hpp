#pragma once

#include <string>

#include "rbal/geometry.hpp"

namespace rbal {

// Hermitian inner product on the level-k section space, in the reference
// monomial basis.
struct InnerProduct {
    Eigen::MatrixXcd H;
    int level_k = 1;
    std::string provenance = "initial";

    int dim() const { return static_cast<int>(H.rows()); }
    // throws ValidationError if not Hermitian positive, ConditioningError if
    // cond > 1e12
    void validate() const;
    double cond() const;
};

// Pointwise moment map data of the embedding attached to an inner product.
// mu(p) = zhat zhat^* / |zhat|^2 with zhat = C z the orthonormal-frame
// coordinates; mu_bar averages mu against the L-level FS volume (the L^k
// pullback volume scaled by k^{-n}), so tr(mu_bar) = V.
struct MomentData {
    int level_k = 1;
    Eigen::MatrixXcd Zhat;       // npts x dim
    Eigen::VectorXd vol_weights; // npts, k^{-n} vol_density * grid weights
    Eigen::MatrixXcd mu_bar;
    double c_value = 0.0;        // tr(mu_bar)/(N+1)

    Eigen::MatrixXcd mu(int p) const;             // rank-one projector at p
    Eigen::MatrixXcd traceless() const;           // mu_bar - c_value I
};

// Cholesky-based orthonormalization: H = L L^*, C = L^{-1}, K = C^* C = H^{-1}.
// The frame zhat = C z satisfies <shat_i, shat_j>_{FS(H)} summing to 1.
Eigen::MatrixXcd orthonormal_frame(const InnerProduct& H);   // C
Eigen::MatrixXcd orthonormal_gram_inverse(const InnerProduct& H);  // K = H^{-1}

// FS_k: phi(p) = log(z^* K z) on L^k.
FiberMetric fs(const SectionFrame& frame, const InnerProduct& H);

// Hilb_k: H_ij = (N+1)/V int z_i conj(z_j) e^{-phi} omega_h^n.
InnerProduct hilb(const SectionFrame& frame, const FiberMetric& h);

// T = Hilb o FS.
InnerProduct t_operator(const SectionFrame& frame, const InnerProduct& H);

MomentData moment_data(const SectionFrame& frame, const InnerProduct& H);

// same, but with an explicit frame matrix zhat = C z; needed along geodesics
// C_t = e^{tA} C_0 where the Cholesky frame would differ by a unitary
MomentData moment_data_frame(const SectionFrame& frame, const Eigen::MatrixXcd& C);

// Bergman density rho(p) = e^{-phi} z^* G^{-1} z with the plain Gram
// G_ij = int z_i conj(z_j) e^{-phi} omega_h^n; integrates to N+1.
Eigen::VectorXd bergman_density(const SectionFrame& frame, const FiberMetric& h);

// Normalized density rho_hat = rho * k^n V/(N+1) (== k^n on round P1) and its
// curvature-corrected ratio: rho_tilde = (k^n/rho_hat) (omega + k^{-1} i
// ddbar log rho)^n / omega^n. Tends to 1 as k grows.
Eigen::VectorXd rho_tilde(const SectionFrame& frame, const FiberMetric& h);

// Q_k(f) = int f shat_i conj(shat_j) e^{-phi} omega_h^n in the Hilb_k(h)
// orthonormal basis; Q_k(1) = (V/(N+1)) I.
Eigen::MatrixXcd q_operator(const SectionFrame& frame, const FiberMetric& h,
                            const Eigen::VectorXd& f);

// H_k(A)(p) = tr(mu(p) A).
Eigen::VectorXd h_operator(const MomentData& md, const Eigen::MatrixXcd& A);

// Derivative of the balancing energy along H_t = e^{t dH} H at t = 0:
// equals tr(dH mu_bar).
double aubin_yau_directional(const SectionFrame& frame, const InnerProduct& H,
                             const Eigen::MatrixXcd& dH);

}  // namespace rbal
