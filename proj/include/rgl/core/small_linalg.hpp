#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <initializer_list>
#include <stdexcept>

// Fixed-capacity dense linear algebra for dimensions 2 and 3.
// Everything downstream (charts, metrics, Jacobi frames) lives in R^2 or R^3,
// so a pair of tiny value types beats a general matrix library here.

namespace rgl {

inline constexpr int kMaxDim = 3;

struct Vec {
    std::array<double, kMaxDim> a{0.0, 0.0, 0.0};
    int n = 0;

    Vec() = default;
    explicit Vec(int dim) : n(dim) {}
    Vec(std::initializer_list<double> xs) : n(static_cast<int>(xs.size())) {
        int i = 0;
        for (double x : xs) a[static_cast<size_t>(i++)] = x;
    }

    double& operator[](int i) { return a[static_cast<size_t>(i)]; }
    double operator[](int i) const { return a[static_cast<size_t>(i)]; }

    static Vec zero(int dim) { return Vec(dim); }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < n; ++i) a[i] += o.a[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < n; ++i) a[i] -= o.a[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < n; ++i) a[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec x, const Vec& y) { return x += y; }
    friend Vec operator-(Vec x, const Vec& y) { return x -= y; }
    friend Vec operator*(Vec x, double s) { return x *= s; }
    friend Vec operator*(double s, Vec x) { return x *= s; }
    friend Vec operator-(Vec x) { return x *= -1.0; }

    double dot(const Vec& o) const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += a[i] * o.a[i];
        return s;
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
};

struct Mat {
    std::array<double, kMaxDim * kMaxDim> a{};
    int n = 0;

    Mat() = default;
    explicit Mat(int dim) : n(dim) {}

    double& at(int i, int j) { return a[static_cast<size_t>(i * kMaxDim + j)]; }
    double at(int i, int j) const { return a[static_cast<size_t>(i * kMaxDim + j)]; }

    static Mat identity(int dim) {
        Mat m(dim);
        for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
        return m;
    }
    static Mat zero(int dim) { return Mat(dim); }

    Vec col(int j) const {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = at(i, j);
        return v;
    }
    void set_col(int j, const Vec& v) {
        for (int i = 0; i < n; ++i) at(i, j) = v[i];
    }

    Mat& operator+=(const Mat& o) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) at(i, j) += o.at(i, j);
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) at(i, j) -= o.at(i, j);
        return *this;
    }
    Mat& operator*=(double s) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) at(i, j) *= s;
        return *this;
    }
    friend Mat operator+(Mat x, const Mat& y) { return x += y; }
    friend Mat operator-(Mat x, const Mat& y) { return x -= y; }
    friend Mat operator*(Mat x, double s) { return x *= s; }
    friend Mat operator*(double s, Mat x) { return x *= s; }

    Vec operator*(const Vec& v) const {
        Vec r(n);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += at(i, j) * v[j];
            r[i] = s;
        }
        return r;
    }
    Mat operator*(const Mat& o) const {
        Mat r(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0;
                for (int k = 0; k < n; ++k) s += at(i, k) * o.at(k, j);
                r.at(i, j) = s;
            }
        return r;
    }

    Mat transposed() const {
        Mat r(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) r.at(i, j) = at(j, i);
        return r;
    }

    double det() const {
        if (n == 1) return at(0, 0);
        if (n == 2) return at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
        return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
               at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
               at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
    }

    Mat inverse() const {
        Mat r(n);
        const double d = det();
        if (d == 0.0) throw std::runtime_error("Mat::inverse: singular matrix");
        if (n == 1) {
            r.at(0, 0) = 1.0 / d;
            return r;
        }
        if (n == 2) {
            r.at(0, 0) = at(1, 1) / d;
            r.at(1, 1) = at(0, 0) / d;
            r.at(0, 1) = -at(0, 1) / d;
            r.at(1, 0) = -at(1, 0) / d;
            return r;
        }
        // adjugate, 3x3
        r.at(0, 0) = (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) / d;
        r.at(0, 1) = (at(0, 2) * at(2, 1) - at(0, 1) * at(2, 2)) / d;
        r.at(0, 2) = (at(0, 1) * at(1, 2) - at(0, 2) * at(1, 1)) / d;
        r.at(1, 0) = (at(1, 2) * at(2, 0) - at(1, 0) * at(2, 2)) / d;
        r.at(1, 1) = (at(0, 0) * at(2, 2) - at(0, 2) * at(2, 0)) / d;
        r.at(1, 2) = (at(0, 2) * at(1, 0) - at(0, 0) * at(1, 2)) / d;
        r.at(2, 0) = (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0)) / d;
        r.at(2, 1) = (at(0, 1) * at(2, 0) - at(0, 0) * at(2, 1)) / d;
        r.at(2, 2) = (at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0)) / d;
        return r;
    }

    double max_abs() const {
        double m = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m = std::max(m, std::fabs(at(i, j)));
        return m;
    }
};

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
inline Mat cholesky(const Mat& g) {
    Mat l(g.n);
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = g.at(i, j);
            for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

// Orthonormal frame for metric g, columns B_i with B^T g B = I.  This is the
// Gram-Schmidt orthonormalization of the chart coordinate axes: B = L^{-T}
// with g = L L^T, so det B = det(g)^{-1/2} > 0.
inline Mat metric_orthonormal_frame(const Mat& g) {
    const Mat l = cholesky(g);
    Mat b(g.n);
    // solve L^T B = I by back substitution, column by column
    for (int c = 0; c < g.n; ++c) {
        Vec e = Vec::zero(g.n);
        e[c] = 1.0;
        for (int i = g.n - 1; i >= 0; --i) {
            double s = e[i];
            for (int k = i + 1; k < g.n; ++k) s -= l.at(k, i) * b.at(k, c);
            b.at(i, c) = s / l.at(i, i);
        }
        for (int i = 0; i < g.n; ++i) e[i] = 0.0;
    }
    return b;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps (n <= 3).
inline Vec sym_eigenvalues(Mat s) {
    const int n = s.n;
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += s.at(i, j) * s.at(i, j);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(s.at(p, q)) < 1e-300) continue;
                const double theta = (s.at(q, q) - s.at(p, p)) / (2.0 * s.at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                Mat r = s;
                for (int k = 0; k < n; ++k) {
                    r.at(p, k) = c * s.at(p, k) - sn * s.at(q, k);
                    r.at(q, k) = sn * s.at(p, k) + c * s.at(q, k);
                }
                s = r;
                for (int k = 0; k < n; ++k) {
                    r.at(k, p) = c * s.at(k, p) - sn * s.at(k, q);
                    r.at(k, q) = sn * s.at(k, p) + c * s.at(k, q);
                }
                s = r;
            }
    }
    Vec ev(n);
    for (int i = 0; i < n; ++i) ev[i] = s.at(i, i);
    return ev;
}

// Operator norm of a symmetric tensor A with respect to metric g:
// max |eig| of g^{-1}A, computed through the congruent symmetric form
// L^{-1} A L^{-T}.
inline double metric_operator_norm(const Mat& a, const Mat& g) {
    const Mat l = cholesky(g);
    const int n = g.n;
    // X = L^{-1} A  (forward substitution on columns)
    Mat x(n);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = a.at(i, c);
            for (int k = 0; k < i; ++k) s -= l.at(i, k) * x.at(k, c);
            x.at(i, c) = s / l.at(i, i);
        }
    }
    // S = X L^{-T}, i.e. solve S L^T = X  (rows)
    Mat sym(n);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < n; ++i) {
            double s = x.at(r, i);
            for (int k = 0; k < i; ++k) s -= sym.at(r, k) * l.at(i, k);
            sym.at(r, i) = s / l.at(i, i);
        }
    }
    const Vec ev = sym_eigenvalues(sym);
    double m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::fabs(ev[i]));
    return m;
}

// Largest eigenvalue of g^{-1}A (signed), for Ricci upper bounds.
inline double metric_max_eigenvalue(const Mat& a, const Mat& g) {
    const Mat l = cholesky(g);
    const int n = g.n;
    Mat x(n);
    for (int c = 0; c < n; ++c)
        for (int i = 0; i < n; ++i) {
            double s = a.at(i, c);
            for (int k = 0; k < i; ++k) s -= l.at(i, k) * x.at(k, c);
            x.at(i, c) = s / l.at(i, i);
        }
    Mat sym(n);
    for (int r = 0; r < n; ++r)
        for (int i = 0; i < n; ++i) {
            double s = x.at(r, i);
            for (int k = 0; k < i; ++k) s -= sym.at(r, k) * l.at(i, k);
            sym.at(r, i) = s / l.at(i, i);
        }
    const Vec ev = sym_eigenvalues(sym);
    double m = ev[0];
    for (int i = 1; i < n; ++i) m = std::max(m, ev[i]);
    return m;
}

}  // namespace rgl
