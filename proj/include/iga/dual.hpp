#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace iga {

/// Forward-mode scalar carrying N partial derivatives; used to differentiate
/// geometric templates exactly.
template <int N>
struct Dual {
    double v = 0.0;
    Eigen::Matrix<double, N, 1> d = Eigen::Matrix<double, N, 1>::Zero();

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit by design
    static Dual seed(double value, int k) {
        Dual x(value);
        x.d[k] = 1.0;
        return x;
    }

    Dual operator-() const {
        Dual r(-v);
        r.d = -d;
        return r;
    }
    Dual& operator+=(const Dual& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(const Dual& a, const Dual& b) {
        Dual r(a.v * b.v);
        r.d = a.v * b.d + b.v * a.d;
        return r;
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        Dual r(a.v / b.v);
        r.d = (a.d - r.v * b.d) / b.v;
        return r;
    }
    friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
    friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

    friend Dual sqrt(const Dual& a) {
        Dual r(std::sqrt(a.v));
        r.d = a.d / (2.0 * r.v);
        return r;
    }
    friend Dual sin(const Dual& a) {
        Dual r(std::sin(a.v));
        r.d = std::cos(a.v) * a.d;
        return r;
    }
    friend Dual cos(const Dual& a) {
        Dual r(std::cos(a.v));
        r.d = -std::sin(a.v) * a.d;
        return r;
    }
    friend Dual exp(const Dual& a) {
        Dual r(std::exp(a.v));
        r.d = r.v * a.d;
        return r;
    }
    friend Dual atan2(const Dual& y, const Dual& x) {
        Dual r(std::atan2(y.v, x.v));
        const double den = x.v * x.v + y.v * y.v;
        r.d = (x.v * y.d - y.v * x.d) / den;
        return r;
    }
};

} // namespace iga
