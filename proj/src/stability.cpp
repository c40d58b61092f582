#include "rbal/stability.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rbal/errors.hpp"

namespace rbal {

namespace {

Eigen::MatrixXcd herm_exp(const Eigen::MatrixXcd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
    return es.eigenvectors() *
           es.eigenvalues().array().exp().matrix().asDiagonal() *
           es.eigenvectors().adjoint();
}

double opnorm(const Eigen::MatrixXcd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void check_hermitian(const Eigen::MatrixXcd& A, const char* who) {
    if ((A - A.adjoint()).norm() > 1e-12 * std::max(1.0, A.norm()))
        throw ValidationError(std::string(who) + ": A not Hermitian");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Gaussian Hermitian, traceless
Eigen::MatrixXcd random_direction(int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd B(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) B(i, j) = cd(g(rng), g(rng));
    Eigen::MatrixXcd A = 0.5 * (B + B.adjoint());
    A -= (A.trace() / double(d)) * Eigen::MatrixXcd::Identity(d, d);
    return A;
}

void finish_report(RatioReport& rep) {
    if (rep.ratios.empty()) return;
    std::vector<double> s = rep.ratios;
    std::sort(s.begin(), s.end());
    rep.min = s.front();
    rep.max = s.back();
    rep.median = s[s.size() / 2];
}

}  // namespace

TangentSplit xi_split_frame(const SectionFrame& frame, const Eigen::MatrixXcd& C,
                            const Eigen::MatrixXcd& A) {
    check_hermitian(A, "xi_split");
    const int d = frame.dim;
    const int n = frame.grid.n;
    const int P = frame.npts();

    const Eigen::MatrixXcd Zhat = frame.Z * C.transpose();
    const Eigen::MatrixXcd AZ = Zhat * A.transpose();
    std::vector<Eigen::MatrixXcd> CdZ(n);
    for (int a = 0; a < n; ++a) CdZ[a] = frame.dZ[a] * C.transpose();

    const KahlerData kd = pullback_metric(frame, 0.5 * (C.adjoint() * C +
                                                        (C.adjoint() * C).adjoint()));
    const double kinv = std::pow(double(frame.level_k), -n);
    const Eigen::VectorXd vw =
        kinv * kd.vol_density.array() * frame.grid.weights.array();

    TangentSplit ts;
    ts.xi.resize(P, d);
    ts.tangential.resize(P, n);
    ts.normal.resize(P, d);
    ts.norm2_xi.resize(P);
    ts.norm2_tan.resize(P);
    ts.norm2_norm.resize(P);

    Eigen::MatrixXcd U(d, n), G(n, n);
    Eigen::VectorXcd xi(d), rhs(n), X(n);
    for (int p = 0; p < P; ++p) {
        const Eigen::VectorXcd z = Zhat.row(p).transpose();
        const double nz2 = z.squaredNorm();
        const Eigen::VectorXcd Az = AZ.row(p).transpose();
        xi = Az - (z.dot(Az) / nz2) * z;
        // embedded tangent frame: chart derivatives projected off the fiber
        for (int a = 0; a < n; ++a) {
            const Eigen::VectorXcd v = CdZ[a].row(p).transpose();
            U.col(a) = v - (z.dot(v) / nz2) * z;
        }
        G = U.adjoint() * U;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(G);
        if (lu.rank() < n || G.norm() < 1e-13 * nz2)
            throw GeometryError("xi_split: dZ rank-deficient at point " +
                                std::to_string(p));
        rhs = U.adjoint() * xi;
        X = lu.solve(rhs);
        const Eigen::VectorXcd tan = U * X;
        const Eigen::VectorXcd nor = xi - tan;
        ts.xi.row(p) = xi.transpose();
        ts.tangential.row(p) = X.transpose();
        ts.normal.row(p) = nor.transpose();
        ts.norm2_xi[p] = xi.squaredNorm() / nz2;
        ts.norm2_tan[p] = tan.squaredNorm() / nz2;
        ts.norm2_norm[p] = nor.squaredNorm() / nz2;
    }
    ts.l2_xi = (ts.norm2_xi.array() * vw.array()).sum();
    ts.l2_tan = (ts.norm2_tan.array() * vw.array()).sum();
    ts.l2_norm = (ts.norm2_norm.array() * vw.array()).sum();
    return ts;
}

TangentSplit xi_split(const SectionFrame& frame, const InnerProduct& H,
                      const Eigen::MatrixXcd& A) {
    if (H.dim() != frame.dim || H.level_k != frame.level_k)
        throw ValidationError("xi_split: inner product does not match frame");
    return xi_split_frame(frame, orthonormal_frame(H), A);
}

EnergyProfile f_derivatives(const SectionFrame& frame, const InnerProduct& H,
                            const Eigen::MatrixXcd& A,
                            const std::vector<double>& t_grid) {
    check_hermitian(A, "f_derivatives");
    if (t_grid.empty() || !std::is_sorted(t_grid.begin(), t_grid.end()))
        throw ValidationError("f_derivatives: t_grid must be sorted");
    int i0 = -1;
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (std::abs(t_grid[i]) < 1e-14) i0 = static_cast<int>(i);
    if (i0 < 0) throw ValidationError("f_derivatives: t_grid must contain 0");
    const double anorm = opnorm(A);
    const double tmax = std::max(std::abs(t_grid.front()), std::abs(t_grid.back()));
    if (tmax * anorm > 5.0)
        throw ConditioningError("f_derivatives: |t| * ||A||_op exceeds range guard 5");

    const Eigen::MatrixXcd C0 = orthonormal_frame(H);
    const int m = static_cast<int>(t_grid.size());
    EnergyProfile ep;
    ep.t = t_grid;
    ep.f.assign(m, 0.0);
    ep.f_dot.resize(m);
    ep.f_ddot.resize(m);
    for (int i = 0; i < m; ++i) {
        // frame moves at half speed so that d/dt fdot equals fddot exactly
        const Eigen::MatrixXcd Ct = herm_exp(0.5 * t_grid[i] * A) * C0;
        const MomentData md = moment_data_frame(frame, Ct);
        ep.f_dot[i] = std::real((A * md.mu_bar).trace());
        ep.f_ddot[i] = xi_split_frame(frame, Ct, A).l2_norm;
    }
    for (int i = i0; i + 1 < m; ++i)
        ep.f[i + 1] = ep.f[i] +
                      0.5 * (ep.f_dot[i] + ep.f_dot[i + 1]) * (ep.t[i + 1] - ep.t[i]);
    for (int i = i0; i > 0; --i)
        ep.f[i - 1] = ep.f[i] -
                      0.5 * (ep.f_dot[i] + ep.f_dot[i - 1]) * (ep.t[i] - ep.t[i - 1]);
    return ep;
}

RatioReport eigenvalue_bound_report(const SectionFrame& frame, const InnerProduct& H,
                                    const WeightDecomposition& wd,
                                    const std::vector<HermitianDirection>& basisVT,
                                    int samples, std::uint64_t seed) {
    if (samples < 1) throw ValidationError("eigenvalue_bound_report: samples < 1");
    RatioReport rep;
    rep.seed = seed;
    const double k2 = double(frame.level_k) * double(frame.level_k);
    for (int s = 0; s < samples; ++s) {
        Eigen::MatrixXcd A = random_direction(frame.dim, splitmix64(seed + s));
        A = project_VT(project_sT(A, wd), basisVT).second;
        const double tra2 = A.squaredNorm();
        if (tra2 < 1e-20) {
            ++rep.skipped;
            continue;
        }
        const TangentSplit ts = xi_split(frame, H, A);
        rep.ratios.push_back(k2 * ts.l2_norm / tra2);
    }
    finish_report(rep);
    return rep;
}

RatioReport norm_bound_report(const SectionFrame& frame, const InnerProduct& H,
                              int samples, std::uint64_t seed) {
    if (samples < 1) throw ValidationError("norm_bound_report: samples < 1");
    RatioReport rep;
    rep.seed = seed;
    const double k = frame.level_k;
    for (int s = 0; s < samples; ++s) {
        const Eigen::MatrixXcd A = random_direction(frame.dim, splitmix64(seed + s));
        const TangentSplit ts = xi_split(frame, H, A);
        if (ts.l2_xi < 1e-20) {
            ++rep.skipped;
            continue;
        }
        rep.ratios.push_back(A.squaredNorm() / (k * ts.l2_xi));
    }
    finish_report(rep);
    return rep;
}

DistortionReport distortion_report(const SectionFrame& frame, const InnerProduct& H,
                                   const KahlerData& reference_kd, double r_gate) {
    if (reference_kd.n != frame.grid.n)
        throw ValidationError("distortion_report: reference dimension mismatch");
    const KahlerData kd = pullback_metric(frame, orthonormal_gram_inverse(H));
    const int n = frame.grid.n;
    const int P = frame.npts();
    const double k = frame.level_k;

    DistortionReport rep;
    rep.r_gate = r_gate;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    Eigen::MatrixXcd Gt(n, n), G0(n, n);
    for (int p = 0; p < P; ++p) {
        if (n == 1) {
            const double r = std::real(kd.g[0][p]) / (k * std::real(reference_kd.g[0][p]));
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            continue;
        }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                Gt(a, b) = kd.g[a * n + b][p];
                G0(a, b) = k * reference_kd.g[a * n + b][p];
            }
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(
            0.5 * (Gt + Gt.adjoint()), 0.5 * (G0 + G0.adjoint()),
            Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
        lo = std::min(lo, es.eigenvalues().minCoeff());
        hi = std::max(hi, es.eigenvalues().maxCoeff());
    }
    rep.R_lower = lo;
    rep.R_upper = hi;
    rep.c0 = std::max(hi - 1.0, 1.0 - lo);

    // C^2 stencil estimate on the entrywise difference, normalized by the
    // reference scale
    DiffOps ops(frame.grid);
    double c2 = 0.0;
    double ref_scale = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const Eigen::VectorXcd diff =
                kd.g[a * n + b] - k * reference_kd.g[a * n + b];
            ref_scale = std::max(
                ref_scale, (k * reference_kd.g[a * n + b]).cwiseAbs().maxCoeff());
            for (int c = 0; c < n; ++c)
                for (int e = 0; e < n; ++e)
                    c2 = std::max(c2, ops.ddbar(diff, c, e).cwiseAbs().maxCoeff());
        }
    rep.c2 = c2 / ref_scale;
    rep.gate_passed = lo > 0.0 && hi / lo <= r_gate;
    return rep;
}

std::optional<Destabilizer> destabilizer_scan(const SectionFrame& frame,
                                              const InnerProduct& H,
                                              const WeightDecomposition& wd,
                                              const std::vector<HermitianDirection>& basisVT,
                                              int budget) {
    if (budget < 1) throw ValidationError("destabilizer_scan: budget must be >= 1");
    const MomentData md = moment_data(frame, H);
    const Eigen::MatrixXcd A =
        project_VT(project_sT(md.traceless(), wd), basisVT).first;
    if (A.norm() < 1e-9 * md.mu_bar.norm()) return std::nullopt;

    Destabilizer out;
    out.A = A;
    out.slope = A.squaredNorm();
    const int m = std::min(budget + 1, 9);
    const double tmax = std::min(1.0, 4.0 / opnorm(A));
    const Eigen::MatrixXcd C0 = orthonormal_frame(H);
    for (int i = 0; i < m; ++i) {
        const double t = (m == 1) ? 0.0 : -tmax + 2.0 * tmax * i / (m - 1);
        const MomentData mdt = moment_data_frame(frame, herm_exp(0.5 * t * A) * C0);
        const double fdot = std::real((A * mdt.mu_bar).trace());
        out.t_samples.push_back(t);
        out.f_dot_samples.push_back(fdot);
        out.fit_residual = std::max(out.fit_residual, std::abs(fdot - out.slope));
    }
    return out;
}

}  // namespace rbal
