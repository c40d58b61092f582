#pragma once

#include <vector>

#include "rbal/bergman.hpp"
#include "rbal/geometry.hpp"

namespace rbal {

// Torus weight decomposition of the section space: basis indices grouped by
// equal weight vectors, blocks ordered lexicographically on the weight.
struct WeightDecomposition {
    std::vector<std::vector<int>> characters;  // one weight vector per block
    std::vector<int> block_sizes;
    std::vector<int> index_to_block;
    int torus_rank = 0;

    int dim() const { return static_cast<int>(index_to_block.size()); }
    int blocks() const { return static_cast<int>(block_sizes.size()); }
};

// Traceless Hermitian direction with subspace membership flags.
struct HermitianDirection {
    Eigen::MatrixXcd A;
    bool in_sT = false;
    bool in_VT = false;
    bool in_VT_perp = false;
};

WeightDecomposition weight_blocks(const SectionFrame& frame);

// Orthogonal projection onto s_T: block-diagonal traceless Hermitian part.
Eigen::MatrixXcd project_sT(const Eigen::MatrixXcd& M, const WeightDecomposition& wd);

// Centered diagonal weight matrix of one torus generator.
HermitianDirection lie_rep(const SectionFrame& frame, const WeightDecomposition& wd,
                           int generator_index);

// Frobenius-orthogonal split of a (s_T) direction into V(T) and V(T)-perp.
std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> project_VT(
    const Eigen::MatrixXcd& A, const std::vector<HermitianDirection>& basisVT);

// Normalized Hamiltonian of A: tr(mu A) minus its volume average over kd.
Eigen::VectorXd hamiltonian_potential(const SectionFrame& frame, const MomentData& md,
                                      const KahlerData& kd, const HermitianDirection& A);

// Holomorphic field components X^a with dbar H = i g_{a bar b} X^a dbar w^b.
std::vector<Eigen::VectorXcd> field_from_hamiltonian(const SectionFrame& frame,
                                                     const KahlerData& kd,
                                                     const Eigen::VectorXd& H);

// Hamiltonian of the same field for omega + i ddbar phi, for torus-invariant
// phi: H_phi = H + Re sum_ab g^{a bar b, inv} d_a phi d_bar_b H.
Eigen::VectorXd hamiltonian_shift(const SectionFrame& frame, const KahlerData& kd,
                                  const Eigen::VectorXd& H, const Eigen::VectorXd& phi);

// Pointwise defect |dbar_b H - i g_{a bar b} X^a| summed over b, against a
// target metric kd.
Eigen::VectorXd hamiltonian_residual(const SectionFrame& frame, const KahlerData& kd,
                                     const Eigen::VectorXd& H,
                                     const std::vector<Eigen::VectorXcd>& X);

}  // namespace rbal
