#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rbal/balance.hpp"
#include "rbal/errors.hpp"
#include "rbal/stability.hpp"

using namespace rbal;

namespace {

double binom(int n, int k) {
    double b = 1.0;
    for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
    return b;
}

InnerProduct round_H(int k) {
    InnerProduct H;
    H.level_k = k;
    H.H = Eigen::MatrixXcd::Zero(k + 1, k + 1);
    for (int j = 0; j <= k; ++j) H.H(j, j) = 1.0 / binom(k, j);
    return H;
}

InnerProduct random_H(int k, unsigned seed, double eps = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const int d = k + 1;
    Eigen::MatrixXcd B(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) B(i, j) = cd(g(rng), g(rng));
    InnerProduct H;
    H.level_k = k;
    H.H = Eigen::MatrixXcd::Identity(d, d) + (eps / (2.0 * std::sqrt(double(d)))) * (B + B.adjoint());
    return H;
}

Eigen::MatrixXcd random_A(int d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd B(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) B(i, j) = cd(g(rng), g(rng));
    Eigen::MatrixXcd A = 0.5 * (B + B.adjoint());
    A -= (A.trace() / double(d)) * Eigen::MatrixXcd::Identity(d, d);
    return A;
}

SectionFrame p1(int k) { return build_p1_backend(k, 48, std::max(32, 2 * k + 4)); }

// Incomplete linear system {1, w, w^3} on P1: a degree-3 torus-invariant
// curve in P^2 with asymmetric weights, so the Chow-type obstruction does
// not vanish. Complete systems on P1 (and products) have it identically
// zero, so this is where relatively-balanced-but-not-balanced lives.
SectionFrame cubic_cusp_frame() {
    SectionFrame fr = p1(3);
    SectionFrame sub = fr;
    const std::vector<int> keep{0, 1, 3};
    sub.dim = 3;
    sub.Z.resize(fr.npts(), 3);
    sub.dZ[0].resize(fr.npts(), 3);
    sub.torus_weights.resize(3, 1);
    for (int c = 0; c < 3; ++c) {
        sub.Z.col(c) = fr.Z.col(keep[c]);
        sub.dZ[0].col(c) = fr.dZ[0].col(keep[c]);
        sub.torus_weights(c, 0) = keep[c];
    }
    return sub;
}

}  // namespace

TEST_CASE("xi_split: kernel, Pythagoras, tangency, homogeneity") {
    const int k = 4;
    SectionFrame fr = p1(k);
    InnerProduct H = random_H(k, 11);

    // projective kernel: A = I gives xi = 0 pointwise
    TangentSplit id = xi_split(fr, H, Eigen::MatrixXcd::Identity(k + 1, k + 1));
    CHECK(id.norm2_xi.maxCoeff() < 1e-24);
    CHECK(id.l2_xi < 1e-20);

    // pointwise Pythagoras for a generic direction
    Eigen::MatrixXcd A = random_A(k + 1, 21);
    TangentSplit ts = xi_split(fr, H, A);
    CHECK((ts.norm2_xi - ts.norm2_tan - ts.norm2_norm).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(ts.l2_xi == doctest::Approx(ts.l2_tan + ts.l2_norm).epsilon(1e-12));

    // independent oracle for the total norm: <xi_A, xi_A> = H_{A^2} - H_A^2
    MomentData md = moment_data(fr, H);
    Eigen::VectorXd hA = h_operator(md, A);
    Eigen::VectorXd hAA = h_operator(md, A * A);
    const double l2_oracle =
        ((hAA.array() - hA.array().square()) * md.vol_weights.array()).sum();
    CHECK(ts.l2_xi == doctest::Approx(l2_oracle).epsilon(1e-12));

    // vector fields of automorphism directions are tangent to the image
    WeightDecomposition wd = weight_blocks(fr);
    HermitianDirection gen = lie_rep(fr, wd, 0);
    TangentSplit tg = xi_split(fr, round_H(k), gen.A);
    CHECK(std::sqrt(tg.l2_norm) < 1e-8);
    CHECK(tg.l2_tan > 1e-2);

    // quadratic homogeneity, so bound ratios are scale invariant
    TangentSplit t2 = xi_split(fr, H, 2.0 * A);
    CHECK(t2.l2_xi == doctest::Approx(4.0 * ts.l2_xi).epsilon(1e-12));
    CHECK(t2.l2_norm == doctest::Approx(4.0 * ts.l2_norm).epsilon(1e-12));

    Eigen::MatrixXcd bad = A;
    bad(0, 1) += cd(0.0, 0.5);
    CHECK_THROWS_AS(xi_split(fr, H, bad), ValidationError);

    // non-immersive sampling is rejected with the offending point
    SectionFrame broken = fr;
    broken.dZ[0].setZero();
    CHECK_THROWS_AS(xi_split_frame(broken, orthonormal_frame(H), A), GeometryError);
}

TEST_CASE("f_derivatives: critical point, convexity, derivative consistency") {
    const int k = 3;
    SectionFrame fr = p1(k);
    std::vector<double> tg{-0.4, -0.2, 0.0, 0.2, 0.4};

    // balanced point is critical for every traceless direction
    InnerProduct Hb = round_H(k);
    for (unsigned s = 1; s <= 3; ++s) {
        EnergyProfile ep = f_derivatives(fr, Hb, random_A(k + 1, s), tg);
        CHECK(std::abs(ep.f_dot[2]) < 1e-9);
        CHECK(std::abs(ep.f[2]) < 1e-15);
    }

    InnerProduct H = random_H(k, 5);
    Eigen::MatrixXcd A = random_A(k + 1, 7);
    EnergyProfile ep = f_derivatives(fr, H, A, tg);

    // fdot(0) is the shared directional derivative definition
    MomentData md = moment_data(fr, H);
    CHECK(ep.f_dot[2] == doctest::Approx(std::real((A * md.mu_bar).trace())).epsilon(1e-14));

    // fddot matches a centered difference of fdot
    const double h = 1e-3;
    EnergyProfile fd = f_derivatives(fr, H, A, {-h, 0.0, h});
    const double fddot_fd = (fd.f_dot[2] - fd.f_dot[0]) / (2.0 * h);
    CHECK(ep.f_ddot[2] == doctest::Approx(fddot_fd).epsilon(1e-5));

    // geodesic convexity: fddot >= 0 and f has nonnegative second differences
    for (unsigned s = 1; s <= 20; ++s) {
        EnergyProfile e = f_derivatives(fr, random_H(k, 100 + s), random_A(k + 1, s), tg);
        for (double dd : e.f_ddot) CHECK(dd >= -1e-10);
        for (std::size_t i = 1; i + 1 < e.f.size(); ++i)
            CHECK(e.f[i + 1] - 2.0 * e.f[i] + e.f[i - 1] >= -1e-8);
    }

    CHECK_THROWS_AS(f_derivatives(fr, H, A, {0.1, 0.0, 0.2}), ValidationError);
    CHECK_THROWS_AS(f_derivatives(fr, H, A, {-0.4, 0.2, 0.4}), ValidationError);
    CHECK_THROWS_AS(f_derivatives(fr, H, 100.0 * A, tg), ConditioningError);
}

TEST_CASE("f_derivatives: V(T) direction at a relatively balanced point is affine") {
    SectionFrame fr = cubic_cusp_frame();
    WeightDecomposition wd = weight_blocks(fr);
    std::vector<HermitianDirection> basis{lie_rep(fr, wd, 0)};

    InnerProduct H0;
    H0.level_k = 3;
    H0.H = Eigen::MatrixXcd::Identity(3, 3);
    SolveOptions opts;
    opts.tol = 1e-9;
    SolveReport rep = solve_relative(fr, H0, wd, basis, opts);
    REQUIRE(rep.status == "converged");
    REQUIRE(rep.B_matrix.norm() > 1e-4);  // relatively balanced but not balanced
    CHECK(balanced_residual(moment_data(fr, rep.final_H)) > 1e-4);

    const Eigen::MatrixXcd A = rep.B_matrix;
    std::vector<double> tg{-0.3, -0.15, 0.0, 0.15, 0.3};
    EnergyProfile ep = f_derivatives(fr, rep.final_H, A, tg);
    const double slope = A.squaredNorm();
    for (std::size_t i = 0; i < tg.size(); ++i) {
        CHECK(std::abs(ep.f_dot[i] - slope) < 1e-6 * std::max(1.0, slope));
        CHECK(ep.f_ddot[i] < 1e-8);
    }
    // f(t) = tr(A^2) t + const: linear fit residual
    for (std::size_t i = 0; i < tg.size(); ++i)
        CHECK(std::abs(ep.f[i] - slope * tg[i]) < 1e-6 * std::max(1.0, slope));
}

TEST_CASE("eigenvalue and norm bound reports") {
    WeightDecomposition wd2 = weight_blocks(p1(2));
    double prev_min = -1.0;
    for (int k : {2, 4, 6}) {
        SectionFrame fr = p1(k);
        WeightDecomposition wd = weight_blocks(fr);
        std::vector<HermitianDirection> basis{lie_rep(fr, wd, 0)};
        RatioReport er = eigenvalue_bound_report(fr, round_H(k), wd, basis, 30, 9);
        CHECK(er.skipped == 0);
        CHECK(er.min > 0.0);
        CHECK(er.min <= er.median);
        CHECK(er.median <= er.max);
        if (prev_min > 0.0) {
            CHECK(er.min < 3.0 * prev_min);
            CHECK(er.min > prev_min / 3.0);
        }
        prev_min = er.min;

        RatioReport nr = norm_bound_report(fr, round_H(k), 30, 9);
        CHECK(nr.skipped == 0);
        CHECK(nr.max < 100.0);  // no blow-up at desk scale; value recorded, not pinned
        CHECK(nr.min > 0.0);
    }

    // duplicate seed determinism
    SectionFrame fr = p1(3);
    WeightDecomposition wd = weight_blocks(fr);
    std::vector<HermitianDirection> basis{lie_rep(fr, wd, 0)};
    RatioReport a = eigenvalue_bound_report(fr, round_H(3), wd, basis, 12, 77);
    RatioReport b = eigenvalue_bound_report(fr, round_H(3), wd, basis, 12, 77);
    REQUIRE(a.ratios.size() == b.ratios.size());
    for (std::size_t i = 0; i < a.ratios.size(); ++i) CHECK(a.ratios[i] == b.ratios[i]);
    RatioReport c = eigenvalue_bound_report(fr, round_H(3), wd, basis, 12, 78);
    CHECK(a.ratios[0] != c.ratios[0]);

    CHECK_THROWS_AS(eigenvalue_bound_report(fr, round_H(3), wd, basis, 0, 1), ValidationError);
    CHECK_THROWS_AS(norm_bound_report(fr, round_H(3), 0, 1), ValidationError);
}

TEST_CASE("distortion report") {
    const int k = 6;
    SectionFrame fr = p1(k);
    FiberMetric round_phi{fr.phi_ref};
    KahlerData kd0 = metric_from_potential(fr, round_phi);

    // exact round input: both constants are 1
    DistortionReport exact = distortion_report(fr, round_H(k), kd0);
    CHECK(exact.R_lower == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(exact.R_upper == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(exact.c0 < 1e-8);
    CHECK(exact.c2 < 1e-6);
    CHECK(exact.gate_passed);

    // Hilb of the round potential stays O(1)-equivalent to k omega_0
    DistortionReport hil = distortion_report(fr, hilb(fr, round_phi), kd0);
    CHECK(hil.gate_passed);
    CHECK(hil.R_upper < 2.0);
    CHECK(hil.R_lower > 0.5);

    // constructed violation: torus stretch w -> e w distorts the metric by
    // about e^4 between the two poles
    InnerProduct bad = round_H(k);
    for (int j = 0; j <= k; ++j) bad.H(j, j) *= std::exp(2.0 * (j - 0.5 * k));
    DistortionReport viol = distortion_report(fr, bad, kd0, 20.0);
    CHECK_FALSE(viol.gate_passed);
    CHECK(viol.R_upper / viol.R_lower > 20.0);

    // swapping roles inverts the constants
    InnerProduct Hp = round_H(k);
    Hp.H(1, 1) *= 1.8;
    DistortionReport fwd = distortion_report(fr, Hp, kd0);
    KahlerData kdp = pullback_metric(fr, orthonormal_gram_inverse(Hp));
    kdp.g[0] /= double(k);
    kdp.detg /= double(k);
    kdp.vol_density /= double(k);
    DistortionReport rev = distortion_report(fr, round_H(k), kdp);
    CHECK(rev.R_lower == doctest::Approx(1.0 / fwd.R_upper).epsilon(1e-8));
    CHECK(rev.R_upper == doctest::Approx(1.0 / fwd.R_lower).epsilon(1e-8));
}

TEST_CASE("destabilizer scan") {
    const int k = 3;
    SectionFrame fr = p1(k);
    WeightDecomposition wd = weight_blocks(fr);
    std::vector<HermitianDirection> basis{lie_rep(fr, wd, 0)};

    CHECK_THROWS_AS(destabilizer_scan(fr, round_H(k), wd, basis, 0), ValidationError);

    // balanced input is stable
    CHECK_FALSE(destabilizer_scan(fr, round_H(k), wd, basis, 5).has_value());

    // vanishing obstruction on the complete system: the V(T) component of
    // mu_bar - cI is identically zero across the torus-invariant family, so
    // no torus-invariant H destabilizes
    InnerProduct Hd = round_H(k);
    Hd.H(0, 0) *= 3.0;
    Hd.H(2, 2) *= 0.5;
    MomentData mdd = moment_data(fr, Hd);
    CHECK(project_VT(project_sT(mdd.traceless(), wd), basis).first.norm() <
          1e-10 * mdd.mu_bar.norm());
    CHECK_FALSE(destabilizer_scan(fr, Hd, wd, basis, 5).has_value());

    // incomplete system with nonzero obstruction: relatively balanced, not
    // balanced; the V(T) component certifies linear growth f(t) = tr(A^2) t + c
    SectionFrame cub = cubic_cusp_frame();
    WeightDecomposition cwd = weight_blocks(cub);
    std::vector<HermitianDirection> cbasis{lie_rep(cub, cwd, 0)};
    InnerProduct H0;
    H0.level_k = 3;
    H0.H = Eigen::MatrixXcd::Identity(3, 3);
    SolveOptions opts;
    opts.tol = 1e-9;
    SolveReport rep = solve_relative(cub, H0, cwd, cbasis, opts);
    REQUIRE(rep.status == "converged");
    REQUIRE(rep.B_matrix.norm() > 1e-4);

    auto dst = destabilizer_scan(cub, rep.final_H, cwd, cbasis, 6);
    REQUIRE(dst.has_value());
    CHECK((dst->A - rep.B_matrix).norm() < 1e-8 * rep.B_matrix.norm() + 1e-10);
    CHECK(dst->slope == doctest::Approx(rep.B_matrix.squaredNorm()).epsilon(1e-10));
    CHECK(dst->fit_residual < 1e-6);
    CHECK(dst->t_samples.size() == 7);
    for (double fd : dst->f_dot_samples)
        CHECK(fd == doctest::Approx(dst->slope).epsilon(1e-5));
}
