#pragma once

#include <array>
#include <cmath>

#include "rgl/core/small_linalg.hpp"

// Forward-mode dual numbers with up to kMaxDim partials.  The closed-form
// model evaluators are rational in the chart coordinates, so +,-,*,/ is the
// whole arithmetic surface we need; integrating the geodesic flow over Dual
// states yields the exact variational (L-Jacobi) transport without a separate
// linearized right-hand side.

namespace rgl {

struct Dual {
    double v = 0.0;
    std::array<double, kMaxDim> d{0.0, 0.0, 0.0};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit from constants is the point
    static Dual seeded(double value, int k) {
        Dual x(value);
        x.d[static_cast<size_t>(k)] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < kMaxDim; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < kMaxDim; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < kMaxDim; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator*=(double s) {
        v *= s;
        for (int i = 0; i < kMaxDim; ++i) d[i] *= s;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator*(Dual a, double s) { return a *= s; }
    friend Dual operator*(double s, Dual a) { return a *= s; }
    friend Dual operator-(Dual a) { return a *= -1.0; }
    friend Dual operator+(Dual a, double s) {
        a.v += s;
        return a;
    }
    friend Dual operator+(double s, Dual a) {
        a.v += s;
        return a;
    }
    friend Dual operator-(Dual a, double s) {
        a.v -= s;
        return a;
    }
    friend Dual operator-(double s, const Dual& a) { return Dual(s) - a; }

    friend Dual operator/(const Dual& a, const Dual& b) {
        Dual r;
        r.v = a.v / b.v;
        const double ib = 1.0 / b.v;
        for (int i = 0; i < kMaxDim; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * ib;
        return r;
    }
    friend Dual operator/(Dual a, double s) { return a *= (1.0 / s); }
    friend Dual operator/(double s, const Dual& b) { return Dual(s) / b; }
};

inline Dual sqrt(const Dual& a) {
    Dual r;
    r.v = std::sqrt(a.v);
    const double f = 0.5 / r.v;
    for (int i = 0; i < kMaxDim; ++i) r.d[i] = f * a.d[i];
    return r;
}
// keeps unqualified sqrt(x) valid in scalar-generic code
inline double sqrt(double x) { return std::sqrt(x); }

// Scalar magnitude used by the integrator's error control; for duals the
// partials participate so the transported Jacobi columns meet the same
// tolerance as the base trajectory.
inline double snorm(double x) { return std::fabs(x); }
inline double snorm(const Dual& x) {
    double m = std::fabs(x.v);
    for (int i = 0; i < kMaxDim; ++i) m = std::max(m, std::fabs(x.d[i]));
    return m;
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

}  // namespace rgl
