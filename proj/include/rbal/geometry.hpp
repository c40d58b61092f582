#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rbal {

using cd = std::complex<double>;

// One stencil axis of a structured tensor grid.
struct Axis {
    Eigen::VectorXd nodes;
    bool periodic = false;
    double period = 0.0;  // only meaningful when periodic
};

// A P1 factor parametrized by (theta, phi) with w = tan(theta/2) e^{i phi}.
// Records which tensor axes carry theta and phi.
struct P1Chart {
    int theta_axis = 0;
    int phi_axis = 1;
};

// Structured quadrature grid on the (product of) coordinate chart(s).
//
// `weights` is the full chart quadrature measure: quadrature weight times the
// Jacobian from grid parameters to Lebesgue measure on the complex chart.
// Integrals of volume forms are sums of f * vol_density * weights, where
// vol_density = n! 2^n det(g) comes from a KahlerData.
struct ChartGrid {
    int chart_id = 0;
    int n = 1;                      // complex dimension
    Eigen::MatrixXd params;         // npts x n_params
    Eigen::VectorXd weights;        // npts
    std::vector<Axis> axes;         // tensor axes; empty for ingested frames
    std::vector<int> shape;         // points per axis, row-major flattening
    std::vector<P1Chart> p1_charts; // one per complex factor when structured

    int npts() const { return static_cast<int>(weights.size()); }
    bool structured() const { return !axes.empty(); }
};

// Evaluations of a basis of H^0(M, L^k) on the grid, with chart derivatives.
struct SectionFrame {
    int level_k = 1;
    int dim = 0;                         // N+1
    ChartGrid grid;
    Eigen::MatrixXcd Z;                  // npts x dim, section values z(p)
    std::vector<Eigen::MatrixXcd> dZ;    // n matrices, each npts x dim: d z / d w_a
    Eigen::MatrixXi torus_weights;       // dim x torus_rank (may be 0 columns)
    double volume_V = 0.0;               // reference int omega^n
    // Potential of the reference comparison metric on L^k (pole-regular split
    // for stencil work): phi_ref(p) with analytic dd-bar given by g_ref.
    Eigen::VectorXd phi_ref;             // npts
    std::vector<Eigen::VectorXd> g_ref_diag;  // n entries, analytic dd-bar of phi_ref/k per factor

    int npts() const { return grid.npts(); }
    int torus_rank() const { return static_cast<int>(torus_weights.cols()); }
    void validate() const;  // throws ValidationError on invariant violations
};

// Potential of a fiber metric on L^k: |reference frame|^2_h = e^{-phi}.
struct FiberMetric {
    Eigen::VectorXd phi;  // npts
};

// Pulled-back Kahler data for one fiber/inner-product metric.
struct KahlerData {
    int n = 1;
    std::vector<Eigen::VectorXcd> g;   // n*n entries g[a*n+b] = g_{a \bar b}, npts each
    Eigen::VectorXd detg;              // npts
    Eigen::VectorXd vol_density;       // n! 2^n detg
    Eigen::VectorXd scalar_curv;       // filled by scalar_curvature, else empty
    std::string source;

    // integral of f against vol_density * grid weights
    double integrate(const ChartGrid& grid, const Eigen::VectorXd& f) const;
    double volume(const ChartGrid& grid) const;
};

// --- differential operators on structured grids ----------------------------

// First and second collocation derivatives on a tensor grid. Phi axes use
// trigonometric spectral differentiation. Theta axes use wide Fornberg
// stencils continued across the poles through f(-theta, phi) = f(theta,
// phi + pi), which keeps every stencil centered; the pole-image part acts
// through a half-period roll of the companion phi axis.
class DiffOps {
public:
    explicit DiffOps(const ChartGrid& grid);

    Eigen::VectorXd d_axis(const Eigen::VectorXd& f, int axis, int order) const;
    Eigen::VectorXcd d_axis(const Eigen::VectorXcd& f, int axis, int order) const;

    // complex chart derivatives for factor a (0-based)
    Eigen::VectorXcd dw(const Eigen::VectorXcd& f, int a) const;
    Eigen::VectorXcd dwbar(const Eigen::VectorXcd& f, int a) const;
    // d_{w_a} d_{bar w_b} f for real or complex f
    Eigen::VectorXcd ddbar(const Eigen::VectorXcd& f, int a, int b) const;
    Eigen::VectorXcd ddbar(const Eigen::VectorXd& f, int a, int b) const;

private:
    struct AxisOps {
        Eigen::MatrixXd D1, D2;  // in-range stencil weights
        Eigen::MatrixXd F1, F2;  // pole-image weights (zero for phi axes)
        int phi_axis = -1;       // companion axis for the pole image
    };

    const ChartGrid* grid_;
    std::vector<AxisOps> ops_;

    Eigen::VectorXcd apply_axis(const Eigen::VectorXcd& f, int axis, int order) const;
    Eigen::VectorXcd roll_half(const Eigen::VectorXcd& f, int phi_axis) const;
};

// --- backends ---------------------------------------------------------------

// Monomial sections w^j of O(k) on P^1 over a Gauss-Legendre(cos theta) x
// uniform(phi) grid. volume_V = 2 pi for the round reference metric.
SectionFrame build_p1_backend(int level_k, int n_theta, int n_phi);

// Segre product: sections s_i t_j on the product grid.
SectionFrame build_product_backend(const SectionFrame& a, const SectionFrame& b);

// --- metric operations -------------------------------------------------------

// Pulled-back Fubini-Study metric of the embedding with Gram inverse K:
// g_{a bar b} = d_a d_bar_b log(z^* K z), computed from analytic dZ.
// This is the L^k-level form; its volume is k^n * volume_V.
KahlerData pullback_metric(const SectionFrame& frame, const Eigen::MatrixXcd& K);

// Kahler form omega_h = (i/k) ddbar phi of the L-level metric h = (h^k)^{1/k}.
// phi is differenced against the backend's pole-regular reference.
KahlerData metric_from_potential(const SectionFrame& frame, const FiberMetric& h);

// Laplacian g^{a bar b} d_a d_bar_b f (raw convention; see calibration).
Eigen::VectorXd laplacian(const SectionFrame& frame, const KahlerData& kd, const Eigen::VectorXd& f);

// Scalar curvature -g^{a bar b} d_a d_bar_b log det g (raw convention).
Eigen::VectorXd scalar_curvature(const SectionFrame& frame, const KahlerData& kd);

}  // namespace rbal
