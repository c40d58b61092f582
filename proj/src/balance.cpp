#include "rbal/balance.hpp"

#include <cmath>

#include "rbal/errors.hpp"

namespace rbal {

namespace {

Eigen::MatrixXcd herm_exp(const Eigen::MatrixXcd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
    return es.eigenvectors() *
           es.eigenvalues().array().exp().matrix().asDiagonal() *
           es.eigenvectors().adjoint();
}

void unit_det(InnerProduct& H) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.H, Eigen::EigenvaluesOnly);
    H.H *= std::exp(-es.eigenvalues().array().log().mean());
}

double opnorm(const Eigen::MatrixXcd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void drop_tiny(Eigen::MatrixXcd& P) {
    for (int i = 0; i < P.rows(); ++i)
        for (int j = 0; j < P.cols(); ++j)
            if (std::abs(P(i, j)) < 1e-14) P(i, j) = 0.0;
}

InnerProduct from_frame(const SectionFrame& frame, const Eigen::MatrixXcd& C) {
    InnerProduct out;
    out.level_k = frame.level_k;
    out.provenance = "solver iterate";
    const Eigen::MatrixXcd K = C.adjoint() * C;
    const Eigen::MatrixXcd Ki = K.inverse();
    out.H = 0.5 * (Ki + Ki.adjoint());
    unit_det(out);
    return out;
}

struct DescentDirection {
    Eigen::MatrixXcd P;
    // both residuals for the history
    double r_bal = 0.0;
    double r_rel = 0.0;
};

template <typename DirFn>
SolveReport run_descent(const SectionFrame& frame, const InnerProduct& H0,
                        const SolveOptions& opts, DirFn direction, bool stop_on_relative) {
    SolveReport rep;
    InnerProduct H = H0;
    unit_det(H);
    Eigen::MatrixXcd C = orthonormal_frame(H);
    const double k = frame.level_k;
    try {
        for (int it = 0; it <= opts.max_iter; ++it) {
            MomentData md = moment_data_frame(frame, C);
            DescentDirection d = direction(md);
            rep.residual_history.push_back({it, d.r_bal, d.r_rel});
            const double res = stop_on_relative ? d.r_rel : d.r_bal;
            if (res < opts.tol) {
                rep.status = "converged";
                rep.iterates = it;
                rep.final_H = from_frame(frame, C);
                return rep;
            }
            if (it == opts.max_iter) break;
            drop_tiny(d.P);
            const double pop = opnorm(d.P);
            if (pop == 0.0) {
                rep.status = "converged";
                rep.iterates = it;
                rep.final_H = from_frame(frame, C);
                return rep;
            }
            // slope of the balancing energy along -P; negative by construction
            const double s0 = -std::real((d.P * md.mu_bar).trace());
            double eta = 1.0 / (k * pop);
            bool accepted = false;
            for (int bt = 0; bt < 40; ++bt) {
                const Eigen::MatrixXcd Ct = herm_exp(-eta * d.P) * C;
                MomentData mdt = moment_data_frame(frame, Ct);
                const double s1 = -std::real((d.P * mdt.mu_bar).trace());
                // trapezoid bound on the energy change; valid by convexity
                if (0.5 * (s0 + s1) <= 1e-4 * s0) {
                    C = Ct;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!accepted) {
                rep.status = "diverged";
                rep.iterates = it;
                rep.final_H = from_frame(frame, C);
                return rep;
            }
        }
    } catch (const ConditioningError&) {
        rep.status = "diverged";
        rep.final_H = from_frame(frame, C);
        rep.iterates = static_cast<int>(rep.residual_history.size());
        return rep;
    }
    rep.status = "max-iter";
    rep.iterates = opts.max_iter;
    rep.final_H = from_frame(frame, C);
    return rep;
}

}  // namespace

double balanced_residual(const MomentData& md) {
    return md.traceless().norm() / md.mu_bar.norm();
}

std::pair<double, double> relative_residual(const MomentData& md,
                                            const WeightDecomposition& wd,
                                            const std::vector<HermitianDirection>& basisVT) {
    const Eigen::MatrixXcd M = md.traceless();
    const Eigen::MatrixXcd Ms = project_sT(M, wd);
    const auto [mvt, mperp] = project_VT(Ms, basisVT);
    const double scale = md.mu_bar.norm();
    return {mperp.norm() / scale, (M - Ms).norm() / scale};
}

SolveReport solve_balanced(const SectionFrame& frame, const InnerProduct& H0,
                           const SolveOptions& opts) {
    if (opts.mode == "descent") {
        SolveReport rep = run_descent(
            frame, H0, opts,
            [&](const MomentData& md) {
                DescentDirection d;
                d.P = md.traceless();
                d.r_bal = balanced_residual(md);
                d.r_rel = d.r_bal;
                return d;
            },
            false);
        return rep;
    }
    if (opts.mode != "titer")
        throw ConfigError("solve_balanced: unknown mode '" + opts.mode + "'");

    SolveReport rep;
    InnerProduct H = H0;
    unit_det(H);
    try {
        for (int it = 0; it <= opts.max_iter; ++it) {
            MomentData md = moment_data(frame, H);
            const double r = balanced_residual(md);
            rep.residual_history.push_back({it, r, r});
            if (r < opts.tol) {
                rep.status = "converged";
                rep.iterates = it;
                rep.final_H = H;
                return rep;
            }
            if (it == opts.max_iter) break;
            H = t_operator(frame, H);
            H.provenance = "solver iterate";
            unit_det(H);
        }
    } catch (const ConditioningError&) {
        rep.status = "diverged";
        rep.final_H = H;
        rep.iterates = static_cast<int>(rep.residual_history.size());
        return rep;
    }
    rep.status = "max-iter";
    rep.iterates = opts.max_iter;
    rep.final_H = H;
    return rep;
}

SolveReport solve_relative(const SectionFrame& frame, const InnerProduct& H0,
                           const WeightDecomposition& wd,
                           const std::vector<HermitianDirection>& basisVT,
                           const SolveOptions& opts) {
    SolveReport rep = run_descent(
        frame, H0, opts,
        [&](const MomentData& md) {
            DescentDirection d;
            const auto [rrel, off] = relative_residual(md, wd, basisVT);
            d.r_bal = balanced_residual(md);
            d.r_rel = rrel;
            const auto [mvt, mperp] = project_VT(project_sT(md.traceless(), wd), basisVT);
            d.P = mperp;
            return d;
        },
        true);
    MomentData md = moment_data(frame, rep.final_H);
    rep.B_matrix = project_VT(project_sT(md.traceless(), wd), basisVT).first;
    return rep;
}

InnerProduct torus_translate(const InnerProduct& H, const std::vector<HermitianDirection>& basisVT,
                             const Eigen::VectorXd& t) {
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(H.dim(), H.dim());
    for (int i = 0; i < t.size(); ++i) D += t[i] * basisVT[i].A;
    const Eigen::MatrixXcd E = herm_exp(-D);
    InnerProduct out = H;
    out.H = E * H.H * E;
    out.provenance = "torus translate";
    return out;
}

std::pair<Eigen::VectorXd, double> orbit_match(const SectionFrame& frame,
                                               const InnerProduct& H1, const InnerProduct& H2,
                                               const std::vector<HermitianDirection>& basisVT) {
    const int r = static_cast<int>(basisVT.size());
    // mu_bar is exactly isospectral along torus orbits (the translation is an
    // automorphism, so mu_bar only moves by a unitary); the unit-determinant
    // H spectrum supplies the t-sensitive part of the distance
    auto spectra = [&](InnerProduct H) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> em(moment_data(frame, H).mu_bar,
                                                           Eigen::EigenvaluesOnly);
        unit_det(H);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eh(H.H, Eigen::EigenvaluesOnly);
        Eigen::VectorXd s(2 * H.dim());
        s << em.eigenvalues(), eh.eigenvalues();
        return s;
    };
    const Eigen::VectorXd target = spectra(H2);
    Eigen::VectorXd t = Eigen::VectorXd::Zero(r);
    auto dist = [&](const Eigen::VectorXd& tv) {
        return (spectra(torus_translate(H1, basisVT, tv)) - target).norm();
    };
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double best = dist(t);
    for (int sweep = 0; sweep < 3; ++sweep) {
        for (int i = 0; i < r; ++i) {
            double a = t[i] - 2.0, b = t[i] + 2.0;
            double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
            Eigen::VectorXd tv = t;
            tv[i] = x1;
            double f1 = dist(tv);
            tv[i] = x2;
            double f2 = dist(tv);
            for (int it = 0; it < 60; ++it) {
                if (f1 < f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    tv[i] = x1;
                    f1 = dist(tv);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    tv[i] = x2;
                    f2 = dist(tv);
                }
            }
            t[i] = 0.5 * (a + b);
            tv = t;
            best = dist(tv);
        }
    }
    return {t, best};
}

}  // namespace rbal
