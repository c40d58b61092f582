#include "rbal/bergman.hpp"

#include <cmath>

#include "rbal/errors.hpp"

namespace rbal {

namespace {

constexpr double kCondLimit = 1e12;

// rows scaled by sqrt of a positive weight; used for all Gram-type sums
Eigen::MatrixXcd row_scaled(const Eigen::MatrixXcd& Z, const Eigen::VectorXd& w) {
    return w.array().sqrt().matrix().asDiagonal() * Z;
}

Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& M) {
    return 0.5 * (M + M.adjoint());
}

}  // namespace

void InnerProduct::validate() const {
    if (H.rows() != H.cols()) throw ValidationError("InnerProduct: H not square");
    const double scale = H.norm();
    if ((H - H.adjoint()).norm() > 1e-13 * scale)
        throw ValidationError("InnerProduct: H not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0) throw ValidationError("InnerProduct: H not positive definite");
    if (hi / lo > kCondLimit)
        throw ConditioningError("InnerProduct: condition number exceeds 1e12");
}

double InnerProduct::cond() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

Eigen::MatrixXcd MomentData::mu(int p) const {
    const Eigen::VectorXcd z = Zhat.row(p).transpose();
    return z * z.adjoint() / z.squaredNorm();
}

Eigen::MatrixXcd MomentData::traceless() const {
    return mu_bar - c_value * Eigen::MatrixXcd::Identity(mu_bar.rows(), mu_bar.cols());
}

Eigen::MatrixXcd orthonormal_frame(const InnerProduct& H) {
    H.validate();
    Eigen::LLT<Eigen::MatrixXcd> llt(H.H);
    if (llt.info() != Eigen::Success)
        throw ConditioningError("orthonormal_frame: Cholesky factorization failed");
    const int d = H.dim();
    return llt.matrixL().solve(Eigen::MatrixXcd::Identity(d, d));
}

Eigen::MatrixXcd orthonormal_gram_inverse(const InnerProduct& H) {
    const Eigen::MatrixXcd C = orthonormal_frame(H);
    return hermitize(C.adjoint() * C);
}

FiberMetric fs(const SectionFrame& frame, const InnerProduct& H) {
    if (H.dim() != frame.dim || H.level_k != frame.level_k)
        throw ValidationError("fs: inner product does not match frame");
    const Eigen::MatrixXcd Zhat = frame.Z * orthonormal_frame(H).transpose();
    FiberMetric h;
    h.phi = Zhat.rowwise().squaredNorm().array().log();
    return h;
}

InnerProduct hilb(const SectionFrame& frame, const FiberMetric& h) {
    const KahlerData kd = metric_from_potential(frame, h);
    const Eigen::VectorXd wt = (-h.phi).array().exp() * kd.vol_density.array() *
                               frame.grid.weights.array();
    const Eigen::MatrixXcd S = row_scaled(frame.Z, wt);
    InnerProduct out;
    out.level_k = frame.level_k;
    out.provenance = "Hilb output";
    out.H = hermitize((frame.dim / frame.volume_V) * (S.transpose() * S.conjugate()));
    return out;
}

InnerProduct t_operator(const SectionFrame& frame, const InnerProduct& H) {
    return hilb(frame, fs(frame, H));
}

MomentData moment_data(const SectionFrame& frame, const InnerProduct& H) {
    if (H.dim() != frame.dim || H.level_k != frame.level_k)
        throw ValidationError("moment_data: inner product does not match frame");
    return moment_data_frame(frame, orthonormal_frame(H));
}

MomentData moment_data_frame(const SectionFrame& frame, const Eigen::MatrixXcd& C) {
    MomentData md;
    md.level_k = frame.level_k;
    md.Zhat = frame.Z * C.transpose();
    const KahlerData kd = pullback_metric(frame, hermitize(C.adjoint() * C));
    const double kinv = std::pow(double(frame.level_k), -frame.grid.n);
    md.vol_weights = kinv * kd.vol_density.array() * frame.grid.weights.array();
    const Eigen::VectorXd w =
        md.vol_weights.array() / md.Zhat.rowwise().squaredNorm().array();
    const Eigen::MatrixXcd S = row_scaled(md.Zhat, w);
    md.mu_bar = hermitize(S.transpose() * S.conjugate());
    md.c_value = std::real(md.mu_bar.trace()) / frame.dim;
    return md;
}

Eigen::VectorXd bergman_density(const SectionFrame& frame, const FiberMetric& h) {
    const KahlerData kd = metric_from_potential(frame, h);
    const Eigen::VectorXd wt = (-h.phi).array().exp() * kd.vol_density.array() *
                               frame.grid.weights.array();
    const Eigen::MatrixXcd S = row_scaled(frame.Z, wt);
    InnerProduct G;
    G.level_k = frame.level_k;
    G.H = hermitize(S.transpose() * S.conjugate());
    const Eigen::MatrixXcd Zhat = frame.Z * orthonormal_frame(G).transpose();
    return Zhat.rowwise().squaredNorm().array() * (-h.phi).array().exp();
}

Eigen::VectorXd rho_tilde(const SectionFrame& frame, const FiberMetric& h) {
    const int n = frame.grid.n;
    const int P = frame.npts();
    const double k = frame.level_k;
    const double kn = std::pow(k, n);
    const Eigen::VectorXd rho_hat =
        bergman_density(frame, h) * (kn * frame.volume_V / frame.dim);

    const KahlerData kd = metric_from_potential(frame, h);
    DiffOps ops(frame.grid);
    const Eigen::VectorXd logrho = rho_hat.array().log();
    std::vector<Eigen::VectorXcd> dd(n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) dd[a * n + b] = ops.ddbar(logrho, a, b);

    Eigen::VectorXd out(P);
    Eigen::MatrixXcd gm(n, n);
    for (int p = 0; p < P; ++p) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                gm(a, b) = kd.g[a * n + b][p] + dd[a * n + b][p] / k;
        double det;
        if (n == 1) {
            det = std::real(gm(0, 0));
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gm, Eigen::EigenvaluesOnly);
            det = es.eigenvalues().prod();
            if (es.eigenvalues().minCoeff() <= 0.0) det = -1.0;
        }
        if (det <= 0.0)
            throw GeometryError("rho_tilde: omega + k^{-1} i ddbar log rho not positive at point " +
                                std::to_string(p));
        out[p] = (kn / rho_hat[p]) * det / kd.detg[p];
    }
    return out;
}

Eigen::MatrixXcd q_operator(const SectionFrame& frame, const FiberMetric& h,
                            const Eigen::VectorXd& f) {
    if (f.size() != frame.npts()) throw ValidationError("q_operator: f size mismatch");
    const KahlerData kd = metric_from_potential(frame, h);
    const Eigen::VectorXd wt = (-h.phi).array().exp() * kd.vol_density.array() *
                               frame.grid.weights.array();
    const Eigen::MatrixXcd S = row_scaled(frame.Z, wt);
    InnerProduct G = hilb(frame, h);
    const Eigen::MatrixXcd C = orthonormal_frame(G);
    const Eigen::MatrixXcd M = S.transpose() * f.asDiagonal() * S.conjugate();
    return hermitize(C * M * C.adjoint());
}

Eigen::VectorXd h_operator(const MomentData& md, const Eigen::MatrixXcd& A) {
    if (A.rows() != md.Zhat.cols() || A.cols() != md.Zhat.cols())
        throw ValidationError("h_operator: dimension mismatch");
    const Eigen::MatrixXcd AZ = md.Zhat * A.transpose();
    return (md.Zhat.conjugate().array() * AZ.array())
               .rowwise()
               .sum()
               .real()
               .array() /
           md.Zhat.rowwise().squaredNorm().array();
}

double aubin_yau_directional(const SectionFrame& frame, const InnerProduct& H,
                             const Eigen::MatrixXcd& dH) {
    if ((dH - dH.adjoint()).norm() > 1e-12 * std::max(1.0, dH.norm()))
        throw ValidationError("aubin_yau_directional: dH not Hermitian");
    const MomentData md = moment_data(frame, H);
    return std::real((dH * md.mu_bar).trace());
}

}  // namespace rbal
