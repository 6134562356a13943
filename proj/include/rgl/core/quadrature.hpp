#pragma once

#include <cmath>
#include <vector>

#include "rgl/core/small_linalg.hpp"

namespace rgl {

// Gauss-Legendre nodes and weights on [a, b] by Newton iteration on the
// Legendre polynomial, symmetric pairs computed once.
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x,
                           std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

// 26-point Lebedev rule on S^2 (octahedron vertices, edge midpoints, face
// centers), exact through degree 7; weights sum to 4*pi.
inline void lebedev26(std::vector<Vec>& dirs, std::vector<double>& w) {
    dirs.clear();
    w.clear();
    const double a1 = 1.0 / 21.0, a2 = 4.0 / 105.0, a3 = 27.0 / 840.0;
    const double s2 = 1.0 / std::sqrt(2.0), s3 = 1.0 / std::sqrt(3.0);
    auto add = [&](double x, double y, double z, double wt) {
        dirs.push_back(Vec{x, y, z});
        w.push_back(wt * 4.0 * M_PI);
    };
    for (int s : {-1, 1}) {
        add(s, 0, 0, a1);
        add(0, s, 0, a1);
        add(0, 0, s, a1);
    }
    for (int sx : {-1, 1})
        for (int sy : {-1, 1}) {
            add(sx * s2, sy * s2, 0, a2);
            add(sx * s2, 0, sy * s2, a2);
            add(0, sx * s2, sy * s2, a2);
        }
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1}) add(sx * s3, sy * s3, sz * s3, a3);
}

// Composite Simpson on a callable, for test oracles and 1-D closed forms.
template <class F>
double simpson(F&& f, double a, double b, int intervals) {
    if (intervals % 2) ++intervals;
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace rgl
