#include "rbal/symmetry.hpp"

#include <algorithm>
#include <map>

#include "rbal/errors.hpp"

namespace rbal {

WeightDecomposition weight_blocks(const SectionFrame& frame) {
    if (frame.torus_rank() == 0)
        throw ValidationError("weight_blocks: frame carries no torus weight tags");
    const int d = frame.dim;
    const int r = frame.torus_rank();
    std::map<std::vector<int>, std::vector<int>> groups;  // lexicographic by key
    for (int i = 0; i < d; ++i) {
        std::vector<int> chi(r);
        for (int t = 0; t < r; ++t) chi[t] = frame.torus_weights(i, t);
        groups[chi].push_back(i);
    }
    WeightDecomposition wd;
    wd.torus_rank = r;
    wd.index_to_block.assign(d, -1);
    for (const auto& [chi, idx] : groups) {
        const int b = wd.blocks();
        wd.characters.push_back(chi);
        wd.block_sizes.push_back(static_cast<int>(idx.size()));
        for (int i : idx) wd.index_to_block[i] = b;
    }
    return wd;
}

Eigen::MatrixXcd project_sT(const Eigen::MatrixXcd& M, const WeightDecomposition& wd) {
    const int d = wd.dim();
    if (M.rows() != d || M.cols() != d)
        throw ValidationError("project_sT: dimension mismatch");
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (wd.index_to_block[i] == wd.index_to_block[j]) out(i, j) = M(i, j);
    out = 0.5 * (out + out.adjoint()).eval();
    out -= (out.trace() / double(d)) * Eigen::MatrixXcd::Identity(d, d);
    return out;
}

HermitianDirection lie_rep(const SectionFrame& frame, const WeightDecomposition& wd,
                           int generator_index) {
    if (generator_index < 0 || generator_index >= wd.torus_rank)
        throw ValidationError("lie_rep: generator index out of range");
    const int d = wd.dim();
    Eigen::VectorXd w(d);
    for (int i = 0; i < d; ++i)
        w[i] = wd.characters[wd.index_to_block[i]][generator_index];
    w.array() -= w.mean();
    HermitianDirection dir;
    dir.A = w.cast<cd>().asDiagonal();
    dir.in_sT = true;
    dir.in_VT = true;
    return dir;
}

std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> project_VT(
    const Eigen::MatrixXcd& A, const std::vector<HermitianDirection>& basisVT) {
    const int m = static_cast<int>(basisVT.size());
    Eigen::MatrixXd G(m, m);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j)
            G(i, j) = std::real((basisVT[i].A * basisVT[j].A).trace());
        b[i] = std::real((basisVT[i].A * A).trace());
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
    if (lu.rank() < m)
        throw ConditioningError("project_VT: rank-deficient V(T) basis Gram matrix");
    const Eigen::VectorXd c = lu.solve(b);
    Eigen::MatrixXcd avt = Eigen::MatrixXcd::Zero(A.rows(), A.cols());
    for (int i = 0; i < m; ++i) avt += c[i] * basisVT[i].A;
    return {avt, A - avt};
}

Eigen::VectorXd hamiltonian_potential(const SectionFrame& frame, const MomentData& md,
                                      const KahlerData& kd, const HermitianDirection& A) {
    Eigen::VectorXd f = h_operator(md, A.A);
    f.array() -= kd.integrate(frame.grid, f) / kd.volume(frame.grid);
    return f;
}

std::vector<Eigen::VectorXcd> field_from_hamiltonian(const SectionFrame& frame,
                                                     const KahlerData& kd,
                                                     const Eigen::VectorXd& H) {
    const int n = kd.n;
    const int P = frame.npts();
    DiffOps ops(frame.grid);
    std::vector<Eigen::VectorXcd> dbarH(n);
    for (int b = 0; b < n; ++b) dbarH[b] = ops.dwbar(H.cast<cd>(), b);
    std::vector<Eigen::VectorXcd> X(n, Eigen::VectorXcd(P));
    Eigen::MatrixXcd gm(n, n);
    Eigen::VectorXcd rhs(n);
    for (int p = 0; p < P; ++p) {
        // dbar_b H = i g_{a bar b} X^a
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) gm(b, a) = kd.g[a * n + b][p];
            rhs(a) = dbarH[a][p];
        }
        const Eigen::VectorXcd x = gm.partialPivLu().solve(rhs) / cd(0.0, 1.0);
        for (int a = 0; a < n; ++a) X[a][p] = x[a];
    }
    return X;
}

Eigen::VectorXd hamiltonian_shift(const SectionFrame& frame, const KahlerData& kd,
                                  const Eigen::VectorXd& H, const Eigen::VectorXd& phi) {
    const int n = kd.n;
    const int P = frame.npts();
    DiffOps ops(frame.grid);
    std::vector<Eigen::VectorXcd> dphi(n), dbarH(n);
    for (int a = 0; a < n; ++a) {
        dphi[a] = ops.dw(phi.cast<cd>(), a);
        dbarH[a] = ops.dwbar(H.cast<cd>(), a);
    }
    Eigen::VectorXd out = H;
    Eigen::MatrixXcd gm(n, n);
    for (int p = 0; p < P; ++p) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) gm(a, b) = kd.g[a * n + b][p];
        const Eigen::MatrixXcd gi = gm.inverse();
        cd acc = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) acc += gi(b, a) * dphi[a][p] * dbarH[b][p];
        out[p] += std::real(acc);
    }
    return out;
}

Eigen::VectorXd hamiltonian_residual(const SectionFrame& frame, const KahlerData& kd,
                                     const Eigen::VectorXd& H,
                                     const std::vector<Eigen::VectorXcd>& X) {
    const int n = kd.n;
    const int P = frame.npts();
    DiffOps ops(frame.grid);
    std::vector<Eigen::VectorXcd> dbarH(n);
    for (int b = 0; b < n; ++b) dbarH[b] = ops.dwbar(H.cast<cd>(), b);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(P);
    for (int p = 0; p < P; ++p)
        for (int b = 0; b < n; ++b) {
            cd acc = dbarH[b][p];
            for (int a = 0; a < n; ++a)
                acc -= cd(0.0, 1.0) * kd.g[a * n + b][p] * X[a][p];
            out[p] += std::abs(acc);
        }
    return out;
}

}  // namespace rbal
