#include "rbal/quadrature.hpp"

#include <cmath>

#include "rbal/errors.hpp"

namespace rbal {

void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    if (n < 1) throw ConfigError("gauss_legendre: n must be >= 1");
    nodes.resize(n);
    weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

Eigen::MatrixXd fornberg_weights(double x0, const std::vector<double>& x, int max_order) {
    const int nd = static_cast<int>(x.size());
    const int m = max_order;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m + 1, nd);
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c(0, 0) = 1.0;
    for (int i = 1; i < nd; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c(k, i) = c1 * (k * c(k - 1, i - 1) - c5 * c(k, i - 1)) / c2;
                c(0, i) = -c1 * c5 * c(0, i - 1) / c2;
            }
            for (int k = mn; k >= 1; --k)
                c(k, j) = (c4 * c(k, j) - k * c(k - 1, j)) / c3;
            c(0, j) = c4 * c(0, j) / c3;
        }
        c1 = c2;
    }
    return c;
}

}  // namespace rbal
