#include "iga/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace iga {

QuadratureRule gauss_rule(int n) {
    if (n < 1 || n > 16) throw std::invalid_argument("gauss_rule: n must be in [1, 16]");
    QuadratureRule r;
    r.points.resize(n);
    r.weights.resize(n);
    // Newton iteration on Legendre polynomials over [-1,1]
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.points[n - 1 - i] = 0.5 * (1.0 + x);
        r.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

} // namespace iga
