#include "rbal/geometry.hpp"

#include <cmath>

#include "rbal/errors.hpp"
#include "rbal/quadrature.hpp"

namespace rbal {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

// --- SectionFrame -----------------------------------------------------------

void SectionFrame::validate() const {
    const int P = npts();
    if (dim < 1) throw ValidationError("SectionFrame: dim must be >= 1");
    if (level_k < 1) throw ValidationError("SectionFrame: level_k must be >= 1");
    if (Z.rows() != P || Z.cols() != dim)
        throw ValidationError("SectionFrame: Z shape does not match grid/dim");
    if (static_cast<int>(dZ.size()) != grid.n)
        throw ValidationError("SectionFrame: dZ must have one matrix per complex factor");
    for (const auto& d : dZ)
        if (d.rows() != P || d.cols() != dim)
            throw ValidationError("SectionFrame: dZ shape does not match grid/dim");
    if (grid.params.rows() != P)
        throw ValidationError("SectionFrame: params/weights point counts disagree");
    for (int p = 0; p < P; ++p) {
        if (!(grid.weights[p] > 0.0))
            throw ValidationError("SectionFrame: non-positive quadrature weight at point " + std::to_string(p));
        if (Z.row(p).norm() == 0.0)
            throw ValidationError("SectionFrame: zero section vector at point " + std::to_string(p));
    }
    if (torus_weights.size() > 0 && torus_weights.rows() != dim)
        throw ValidationError("SectionFrame: torus_weights rows must equal dim");
}

double KahlerData::integrate(const ChartGrid& grid, const Eigen::VectorXd& f) const {
    return (f.array() * vol_density.array() * grid.weights.array()).sum();
}

double KahlerData::volume(const ChartGrid& grid) const {
    return (vol_density.array() * grid.weights.array()).sum();
}

// --- DiffOps ----------------------------------------------------------------

namespace {

// apply an m x m matrix along one tensor axis
Eigen::VectorXcd tensor_apply(const Eigen::VectorXcd& f, const Eigen::MatrixXd& D,
                              const std::vector<int>& shape, int axis) {
    int stride = 1;
    for (size_t j = axis + 1; j < shape.size(); ++j) stride *= shape[j];
    const int m = shape[axis];
    const int block = stride * m;
    const int P = static_cast<int>(f.size());
    Eigen::VectorXcd out(P);
    for (int base = 0; base < P; base += block) {
        for (int s = 0; s < stride; ++s) {
            for (int i = 0; i < m; ++i) {
                cd acc = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double w = D(i, j);
                    if (w != 0.0) acc += w * f[base + s + j * stride];
                }
                out[base + s + i * stride] = acc;
            }
        }
    }
    return out;
}

}  // namespace

DiffOps::DiffOps(const ChartGrid& grid) : grid_(&grid) {
    if (!grid.structured())
        throw ValidationError("DiffOps: grid has no stencil structure (ingested frame?)");
    const int naxes = static_cast<int>(grid.axes.size());
    ops_.resize(naxes);
    for (const auto& ch : grid.p1_charts) ops_[ch.theta_axis].phi_axis = ch.phi_axis;

    for (int ax = 0; ax < naxes; ++ax) {
        const Eigen::VectorXd& x = grid.axes[ax].nodes;
        const int m = static_cast<int>(x.size());
        AxisOps& op = ops_[ax];
        op.D1 = Eigen::MatrixXd::Zero(m, m);
        op.D2 = Eigen::MatrixXd::Zero(m, m);
        op.F1 = Eigen::MatrixXd::Zero(m, m);
        op.F2 = Eigen::MatrixXd::Zero(m, m);
        if (grid.axes[ax].periodic) {
            // trigonometric spectral differentiation (even m, uniform nodes)
            if (m % 2 != 0)
                throw ValidationError("DiffOps: periodic axes need an even point count");
            const double scale = 2.0 * M_PI / grid.axes[ax].period;
            const double h = 2.0 * M_PI / m;
            for (int i = 0; i < m; ++i) {
                op.D2(i, i) = -(m * m / 12.0 + 1.0 / 6.0) * scale * scale;
                for (int j = 0; j < m; ++j) {
                    if (i == j) continue;
                    const double sgn = ((i - j) % 2 == 0) ? 1.0 : -1.0;
                    const double s = std::sin((i - j) * h / 2.0);
                    op.D1(i, j) = 0.5 * sgn * (std::cos((i - j) * h / 2.0) / s) * scale;
                    op.D2(i, j) = -sgn / (2.0 * s * s) * scale * scale;
                }
            }
        } else {
            // theta nodes continued across both poles: the extended sequence is
            // (-x[m-1..0], x[0..m-1], 2 pi - x[m-1..0]); image values live on
            // the half-rolled phi column.
            std::vector<double> ext(3 * m);
            std::vector<int> src(3 * m);
            std::vector<bool> flip(3 * m);
            for (int j = 0; j < m; ++j) {
                ext[j] = -x[m - 1 - j];
                src[j] = m - 1 - j;
                flip[j] = true;
                ext[m + j] = x[j];
                src[m + j] = j;
                flip[m + j] = false;
                ext[2 * m + j] = 2.0 * M_PI - x[m - 1 - j];
                src[2 * m + j] = m - 1 - j;
                flip[2 * m + j] = true;
            }
            const int w = std::min(13, m);
            for (int i = 0; i < m; ++i) {
                const int lo = m + i - w / 2;
                std::vector<double> xs(ext.begin() + lo, ext.begin() + lo + w);
                Eigen::MatrixXd W = fornberg_weights(x[i], xs, 2);
                for (int j = 0; j < w; ++j) {
                    Eigen::MatrixXd& M1 = flip[lo + j] ? op.F1 : op.D1;
                    Eigen::MatrixXd& M2 = flip[lo + j] ? op.F2 : op.D2;
                    M1(i, src[lo + j]) += W(1, j);
                    M2(i, src[lo + j]) += W(2, j);
                }
            }
        }
    }
}

Eigen::VectorXcd DiffOps::roll_half(const Eigen::VectorXcd& f, int phi_axis) const {
    const auto& shape = grid_->shape;
    int stride = 1;
    for (size_t j = phi_axis + 1; j < shape.size(); ++j) stride *= shape[j];
    const int m = shape[phi_axis];
    const int block = stride * m;
    const int half = m / 2;
    Eigen::VectorXcd out(f.size());
    for (int base = 0; base < f.size(); base += block)
        for (int i = 0; i < m; ++i)
            out.segment(base + i * stride, stride) =
                f.segment(base + ((i + half) % m) * stride, stride);
    return out;
}

Eigen::VectorXcd DiffOps::apply_axis(const Eigen::VectorXcd& f, int axis, int order) const {
    const AxisOps& op = ops_[axis];
    Eigen::VectorXcd out = tensor_apply(f, order == 1 ? op.D1 : op.D2, grid_->shape, axis);
    if (op.phi_axis >= 0) {
        const Eigen::MatrixXd& F = order == 1 ? op.F1 : op.F2;
        if (F.cwiseAbs().maxCoeff() > 0.0)
            out += tensor_apply(roll_half(f, op.phi_axis), F, grid_->shape, axis);
    }
    return out;
}

Eigen::VectorXcd DiffOps::d_axis(const Eigen::VectorXcd& f, int axis, int order) const {
    return apply_axis(f, axis, order);
}

Eigen::VectorXd DiffOps::d_axis(const Eigen::VectorXd& f, int axis, int order) const {
    return d_axis(Eigen::VectorXcd(f.cast<cd>()), axis, order).real();
}

Eigen::VectorXcd DiffOps::dw(const Eigen::VectorXcd& f, int a) const {
    const P1Chart& ch = grid_->p1_charts[a];
    const int P = grid_->npts();
    Eigen::VectorXcd ft = d_axis(f, ch.theta_axis, 1);
    Eigen::VectorXcd fp = d_axis(f, ch.phi_axis, 1);
    Eigen::VectorXcd out(P);
    for (int p = 0; p < P; ++p) {
        const double th = grid_->params(p, ch.theta_axis);
        const double ph = grid_->params(p, ch.phi_axis);
        const double r = std::tan(th / 2.0);
        const cd fr = (2.0 / (1.0 + r * r)) * ft[p];
        out[p] = 0.5 * std::exp(cd(0.0, -ph)) * (fr - cd(0.0, 1.0) / r * fp[p]);
    }
    return out;
}

Eigen::VectorXcd DiffOps::dwbar(const Eigen::VectorXcd& f, int a) const {
    const P1Chart& ch = grid_->p1_charts[a];
    const int P = grid_->npts();
    Eigen::VectorXcd ft = d_axis(f, ch.theta_axis, 1);
    Eigen::VectorXcd fp = d_axis(f, ch.phi_axis, 1);
    Eigen::VectorXcd out(P);
    for (int p = 0; p < P; ++p) {
        const double th = grid_->params(p, ch.theta_axis);
        const double ph = grid_->params(p, ch.phi_axis);
        const double r = std::tan(th / 2.0);
        const cd fr = (2.0 / (1.0 + r * r)) * ft[p];
        out[p] = 0.5 * std::exp(cd(0.0, ph)) * (fr + cd(0.0, 1.0) / r * fp[p]);
    }
    return out;
}

Eigen::VectorXcd DiffOps::ddbar(const Eigen::VectorXcd& f, int a, int b) const {
    if (a != b) return dw(dwbar(f, b), a);
    // same factor: quarter of the Euclidean Laplacian in the w-plane,
    // pulled back through r = tan(theta/2)
    const P1Chart& ch = grid_->p1_charts[a];
    const int P = grid_->npts();
    Eigen::VectorXcd ft = d_axis(f, ch.theta_axis, 1);
    Eigen::VectorXcd ftt = d_axis(f, ch.theta_axis, 2);
    Eigen::VectorXcd fpp = d_axis(f, ch.phi_axis, 2);
    Eigen::VectorXcd out(P);
    for (int p = 0; p < P; ++p) {
        const double th = grid_->params(p, ch.theta_axis);
        const double r = std::tan(th / 2.0);
        const double q = 1.0 + r * r;
        const cd frr = (4.0 / (q * q)) * ftt[p] - (4.0 * r / (q * q)) * ft[p];
        const cd fr = (2.0 / q) * ft[p];
        out[p] = 0.25 * (frr + fr / r + fpp[p] / (r * r));
    }
    return out;
}

Eigen::VectorXcd DiffOps::ddbar(const Eigen::VectorXd& f, int a, int b) const {
    return ddbar(Eigen::VectorXcd(f.cast<cd>()), a, b);
}

// --- P1 backend ---------------------------------------------------------------

SectionFrame build_p1_backend(int level_k, int n_theta, int n_phi) {
    if (level_k < 1) throw ConfigError("build_p1_backend: level_k must be >= 1");
    if (n_theta < 16 || n_theta < level_k + 2)
        throw ConfigError("build_p1_backend: n_theta below quadrature-exactness threshold");
    if (n_phi < 2 * level_k + 2)
        throw ConfigError("build_p1_backend: n_phi below Nyquist for degree-k integrands");

    Eigen::VectorXd glx, glw;
    gauss_legendre(n_theta, glx, glw);

    SectionFrame fr;
    fr.level_k = level_k;
    fr.dim = level_k + 1;

    ChartGrid& grid = fr.grid;
    grid.n = 1;
    grid.shape = {n_theta, n_phi};

    // theta ascending <=> x = cos(theta) descending
    Axis th_axis;
    th_axis.nodes.resize(n_theta);
    Eigen::VectorXd th_w(n_theta);
    for (int i = 0; i < n_theta; ++i) {
        th_axis.nodes[i] = std::acos(glx[n_theta - 1 - i]);
        th_w[i] = glw[n_theta - 1 - i];
    }
    Axis ph_axis;
    ph_axis.periodic = true;
    ph_axis.period = 2.0 * M_PI;
    ph_axis.nodes.resize(n_phi);
    for (int j = 0; j < n_phi; ++j) ph_axis.nodes[j] = 2.0 * M_PI * j / n_phi;
    grid.axes = {th_axis, ph_axis};
    grid.p1_charts = {P1Chart{0, 1}};

    const int P = n_theta * n_phi;
    grid.params.resize(P, 2);
    grid.weights.resize(P);
    fr.Z.resize(P, fr.dim);
    fr.dZ.assign(1, Eigen::MatrixXcd(P, fr.dim));
    fr.phi_ref.resize(P);
    fr.g_ref_diag.assign(1, Eigen::VectorXd(P));
    const double wphi = 2.0 * M_PI / n_phi;

    for (int i = 0; i < n_theta; ++i) {
        const double th = th_axis.nodes[i];
        const double r = std::tan(th / 2.0);
        const double q = 1.0 + r * r;
        for (int j = 0; j < n_phi; ++j) {
            const int p = i * n_phi + j;
            const double ph = ph_axis.nodes[j];
            grid.params(p, 0) = th;
            grid.params(p, 1) = ph;
            // Lebesgue measure on the w-chart: dA = (1+r^2)^2/4 dx dphi
            grid.weights[p] = q * q / 4.0 * th_w[i] * wphi;
            const cd w = r * std::exp(cd(0.0, ph));
            cd wj = 1.0;
            for (int m = 0; m <= level_k; ++m) {
                fr.Z(p, m) = wj;
                fr.dZ[0](p, m) = (m == 0) ? cd(0.0) : double(m) * wj / w;
                wj *= w;
            }
            fr.phi_ref[p] = level_k * std::log(q);
            fr.g_ref_diag[0][p] = 1.0 / (q * q);
        }
    }

    fr.torus_weights.resize(fr.dim, 1);
    for (int m = 0; m <= level_k; ++m) fr.torus_weights(m, 0) = m;

    // reference volume of the round metric, by quadrature (exact for GL)
    fr.volume_V = (fr.g_ref_diag[0].array() * 2.0 * grid.weights.array()).sum();
    fr.validate();
    return fr;
}

// --- product backend ----------------------------------------------------------

SectionFrame build_product_backend(const SectionFrame& a, const SectionFrame& b) {
    a.validate();
    b.validate();
    if (a.level_k != b.level_k)
        throw ValidationError("build_product_backend: factors must share level_k");
    if (!a.grid.structured() || !b.grid.structured())
        throw ValidationError("build_product_backend: factors must be structured grids");

    SectionFrame fr;
    fr.level_k = a.level_k;
    fr.dim = a.dim * b.dim;

    const int Pa = a.npts(), Pb = b.npts(), P = Pa * Pb;
    const int na = a.grid.n, nb = b.grid.n, n = na + nb;
    const int ca = static_cast<int>(a.grid.params.cols());
    const int cb = static_cast<int>(b.grid.params.cols());

    ChartGrid& grid = fr.grid;
    grid.n = n;
    grid.axes = a.grid.axes;
    grid.axes.insert(grid.axes.end(), b.grid.axes.begin(), b.grid.axes.end());
    grid.shape = a.grid.shape;
    grid.shape.insert(grid.shape.end(), b.grid.shape.begin(), b.grid.shape.end());
    const int axoff = static_cast<int>(a.grid.axes.size());
    grid.p1_charts = a.grid.p1_charts;
    for (const auto& ch : b.grid.p1_charts)
        grid.p1_charts.push_back(P1Chart{ch.theta_axis + axoff, ch.phi_axis + axoff});

    grid.params.resize(P, ca + cb);
    grid.weights.resize(P);
    fr.Z.resize(P, fr.dim);
    fr.dZ.assign(n, Eigen::MatrixXcd(P, fr.dim));
    fr.phi_ref.resize(P);
    fr.g_ref_diag.assign(n, Eigen::VectorXd(P));

    for (int pa = 0; pa < Pa; ++pa) {
        for (int pb = 0; pb < Pb; ++pb) {
            const int p = pa * Pb + pb;
            grid.params.row(p).head(ca) = a.grid.params.row(pa);
            grid.params.row(p).tail(cb) = b.grid.params.row(pb);
            grid.weights[p] = a.grid.weights[pa] * b.grid.weights[pb];
            for (int i = 0; i < a.dim; ++i)
                for (int j = 0; j < b.dim; ++j) {
                    const int col = i * b.dim + j;
                    fr.Z(p, col) = a.Z(pa, i) * b.Z(pb, j);
                    for (int f = 0; f < na; ++f)
                        fr.dZ[f](p, col) = a.dZ[f](pa, i) * b.Z(pb, j);
                    for (int f = 0; f < nb; ++f)
                        fr.dZ[na + f](p, col) = a.Z(pa, i) * b.dZ[f](pb, j);
                }
            fr.phi_ref[p] = a.phi_ref[pa] + b.phi_ref[pb];
            for (int f = 0; f < na; ++f) fr.g_ref_diag[f][p] = a.g_ref_diag[f][pa];
            for (int f = 0; f < nb; ++f) fr.g_ref_diag[na + f][p] = b.g_ref_diag[f][pb];
        }
    }

    const int ra = a.torus_rank(), rb = b.torus_rank();
    fr.torus_weights.resize(fr.dim, ra + rb);
    for (int i = 0; i < a.dim; ++i)
        for (int j = 0; j < b.dim; ++j) {
            const int col = i * b.dim + j;
            for (int t = 0; t < ra; ++t) fr.torus_weights(col, t) = a.torus_weights(i, t);
            for (int t = 0; t < rb; ++t) fr.torus_weights(col, ra + t) = b.torus_weights(j, t);
        }

    // reference volume int omega^n of the product round metric, by quadrature
    const double fact = factorial(n);
    double V = 0.0;
    for (int p = 0; p < P; ++p) {
        double dg = 1.0;
        for (int f = 0; f < n; ++f) dg *= fr.g_ref_diag[f][p];
        V += fact * std::pow(2.0, n) * dg * grid.weights[p];
    }
    fr.volume_V = V;
    fr.validate();
    return fr;
}

// --- pullback metric ------------------------------------------------------------

KahlerData pullback_metric(const SectionFrame& frame, const Eigen::MatrixXcd& K) {
    const int P = frame.npts();
    const int n = frame.grid.n;
    KahlerData kd;
    kd.n = n;
    kd.source = "pullback";
    kd.g.assign(n * n, Eigen::VectorXcd(P));
    kd.detg.resize(P);
    kd.vol_density.resize(P);
    const double fact = factorial(n);

    Eigen::MatrixXcd gm(n, n);
    for (int p = 0; p < P; ++p) {
        const Eigen::VectorXcd z = frame.Z.row(p).transpose();
        const Eigen::VectorXcd Kz = K * z;
        const double S = std::real(z.dot(Kz));  // z^* K z
        std::vector<Eigen::VectorXcd> dz(n);
        std::vector<cd> u(n);
        for (int a = 0; a < n; ++a) {
            dz[a] = frame.dZ[a].row(p).transpose();
            u[a] = z.dot(K * dz[a]);  // z^* K dz_a
        }
        for (int aa = 0; aa < n; ++aa)
            for (int bb = 0; bb < n; ++bb) {
                const cd M = dz[bb].dot(K * dz[aa]);  // (dz_b)^* K dz_a
                gm(aa, bb) = (M * S - u[aa] * std::conj(u[bb])) / (S * S);
                kd.g[aa * n + bb][p] = gm(aa, bb);
            }
        double det;
        bool pos;
        if (n == 1) {
            det = std::real(gm(0, 0));
            pos = det > 0.0;
        } else {
            det = std::real(gm.determinant());
            pos = det > 0.0 && std::real(gm(0, 0)) > 0.0;
            if (pos && n > 2) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gm, Eigen::EigenvaluesOnly);
                pos = es.eigenvalues().minCoeff() > 0.0;
            }
        }
        if (!pos)
            throw GeometryError("pullback_metric: non-positive metric at point " + std::to_string(p));
        kd.detg[p] = det;
        kd.vol_density[p] = fact * std::pow(2.0, n) * det;
    }
    return kd;
}

// --- metric from potential -------------------------------------------------------

KahlerData metric_from_potential(const SectionFrame& frame, const FiberMetric& h) {
    const int P = frame.npts();
    const int n = frame.grid.n;
    if (h.phi.size() != P) throw ValidationError("metric_from_potential: phi size mismatch");
    DiffOps ops(frame.grid);
    const Eigen::VectorXd psi = h.phi - frame.phi_ref;  // pole-regular residual
    const double k = frame.level_k;

    KahlerData kd;
    kd.n = n;
    kd.source = "potential";
    kd.g.assign(n * n, Eigen::VectorXcd(P));
    kd.detg.resize(P);
    kd.vol_density.resize(P);
    const double fact = factorial(n);

    std::vector<Eigen::VectorXcd> dd(n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            dd[a * n + b] = ops.ddbar(psi, a, b);

    Eigen::MatrixXcd gm(n, n);
    for (int p = 0; p < P; ++p) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                cd v = dd[a * n + b][p] / k;
                if (a == b) v += frame.g_ref_diag[a][p];
                gm(a, b) = v;
                kd.g[a * n + b][p] = v;
            }
        double det;
        bool pos;
        if (n == 1) {
            det = std::real(gm(0, 0));
            pos = det > 0.0;
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gm, Eigen::EigenvaluesOnly);
            det = es.eigenvalues().prod();
            pos = es.eigenvalues().minCoeff() > 0.0;
        }
        if (!pos)
            throw GeometryError("metric_from_potential: non-Kahler potential, g indefinite at point " +
                                std::to_string(p));
        kd.detg[p] = det;
        kd.vol_density[p] = fact * std::pow(2.0, n) * det;
    }
    return kd;
}

// --- Laplacian and scalar curvature -----------------------------------------------

Eigen::VectorXd laplacian(const SectionFrame& frame, const KahlerData& kd, const Eigen::VectorXd& f) {
    const int P = frame.npts();
    const int n = kd.n;
    DiffOps ops(frame.grid);
    std::vector<Eigen::VectorXcd> dd(n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            dd[a * n + b] = ops.ddbar(f, a, b);

    Eigen::VectorXd out(P);
    Eigen::MatrixXcd gm(n, n);
    for (int p = 0; p < P; ++p) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) gm(a, b) = kd.g[a * n + b][p];
        const Eigen::MatrixXcd gi = gm.inverse();
        cd acc = 0.0;
        // g^{a bar b} contracts with d_a d_bar_b; inverse indices transpose
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) acc += gi(b, a) * dd[a * n + b][p];
        out[p] = std::real(acc);
    }
    return out;
}

Eigen::VectorXd scalar_curvature(const SectionFrame& frame, const KahlerData& kd) {
    const int P = frame.npts();
    const int n = kd.n;
    DiffOps ops(frame.grid);

    // pole-regular part of log det g (ratio against the round reference)
    Eigen::VectorXd logreg(P);
    for (int p = 0; p < P; ++p) {
        double ref = 1.0;
        for (int a = 0; a < n; ++a) ref *= frame.g_ref_diag[a][p];
        logreg[p] = std::log(kd.detg[p] / ref);
    }
    std::vector<Eigen::VectorXcd> dd(n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            dd[a * n + b] = ops.ddbar(logreg, a, b);

    Eigen::VectorXd out(P);
    Eigen::MatrixXcd gm(n, n);
    for (int p = 0; p < P; ++p) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) gm(a, b) = kd.g[a * n + b][p];
        const Eigen::MatrixXcd gi = gm.inverse();
        cd acc = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                cd v = dd[a * n + b][p];
                if (a == b) v -= 2.0 * frame.g_ref_diag[a][p];
                acc += gi(b, a) * v;
            }
        out[p] = -std::real(acc);
    }
    return out;
}

}  // namespace rbal
