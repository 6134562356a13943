#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rgl/core/dual.hpp"
#include "rgl/core/ode.hpp"
#include "rgl/errors.hpp"
#include "rgl/models/flow_models.hpp"

// Fixed-time Riemannian utilities shared by the downstream modules: inner
// products, distances (closed forms where the model has one, a geodesic BVP
// on the cigar), volume density, and the discrete curve container.

namespace rgl {

// Chart-tagged coordinate samples at strictly increasing parameter knots.
// A chart transition is recorded as two knots at the same parameter value.
struct PathKnot {
    double t = 0.0;
    int chart = 0;
    Vec x;
};

struct PointPath {
    std::vector<PathKnot> knots;
    double param_a = 0.0;
    double param_b = 0.0;
};

inline double inner(const FlowModel& m, const ChartPoint& q, double tau, const Vec& u,
                    const Vec& w) {
    require_time(m, tau);
    require_point(m, q);
    const auto jet = geom_jet(m, q, tau);
    double s = 0;
    for (int i = 0; i < jet.n; ++i)
        for (int j = 0; j < jet.n; ++j) s += jet.g[i][j] * u[i] * w[j];
    return s;
}

inline double norm_g(const FlowModel& m, const ChartPoint& q, double tau, const Vec& u) {
    return std::sqrt(inner(m, q, tau, u, u));
}

inline double volume_density(const FlowModel& m, const ChartPoint& q, double tau) {
    require_time(m, tau);
    require_point(m, q);
    return geom_jet(m, q, tau).sqrt_det;
}

namespace detail {

// Unit-sphere embedding of a stereographic chart point; the two charts differ
// by the sign of the polar coordinate, matching the inversion gluing.
inline void sphere_embed(int nb, int chart, const Vec& x, double* u) {
    double r2 = 0;
    for (int i = 0; i < nb; ++i) r2 += x[i] * x[i];
    const double d = 1.0 + r2;
    for (int i = 0; i < nb; ++i) u[i] = 2.0 * x[i] / d;
    u[nb] = (chart == 0 ? 1.0 : -1.0) * (r2 - 1.0) / d;
}

inline double sphere_angle(int nb, const ChartPoint& q1, const ChartPoint& q2) {
    double u1[4], u2[4];
    sphere_embed(nb, q1.chart, q1.x, u1);
    sphere_embed(nb, q2.chart, q2.x, u2);
    double dot = 0;
    for (int i = 0; i <= nb; ++i) dot += u1[i] * u2[i];
    return std::acos(std::clamp(dot, -1.0, 1.0));
}

// Ordinary (fixed tau) geodesic flow x'' = -Gamma(x) x' x' on [0,1], shot
// with dual transport for the Newton step of the two-point problem.
template <class M>
struct FixedTimeGeodesic {
    const M& model;
    double tau;
    int chart;

    void operator()(double, const Dual* y, Dual* dy) const {
        const int n = model.dim();
        GeomJet<Dual> jet;
        model.geom(chart, y, tau, jet);
        for (int i = 0; i < n; ++i) dy[i] = y[n + i];
        for (int k = 0; k < n; ++k) {
            Dual acc(0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += jet.gamma[k][i][j] * y[n + i] * y[n + j];
            dy[n + k] = -acc;
        }
    }
};

template <class M>
double geodesic_bvp_distance(const M& model, const FlowModel& handle, const ChartPoint& q1,
                             const ChartPoint& q2, double tau) {
    const int n = model.dim();
    if (q1.chart != q2.chart)
        throw OutOfChart("fixed-time geodesic solve expects both points in one chart");
    const Vec delta = q2.x - q1.x;
    if (delta.norm() < 1e-14) return 0.0;

    OdeOptions ode;
    ode.rtol = 1e-10;
    ode.atol = 1e-12;

    auto shoot_end = [&](const Vec& u, Mat& jac_out, Vec& end_out) {
        std::array<Dual, kMaxState> y;
        for (int i = 0; i < n; ++i) {
            y[i] = Dual(q1.x[i]);
            y[n + i] = Dual::seeded(u[i], i);
        }
        FixedTimeGeodesic<M> rhs{model, tau, q1.chart};
        integrate_dopri<Dual>(rhs, y.data(), 2 * n, 0.0, 1.0, ode,
                              [](double, Dual*) { return true; });
        end_out = Vec(n);
        jac_out = Mat(n);
        for (int i = 0; i < n; ++i) {
            end_out[i] = y[i].v;
            for (int j = 0; j < n; ++j) jac_out.at(i, j) = y[i].d[j];
        }
    };

    double best = INFINITY;
    const int kSeeds = 16;
    for (int s = 0; s < kSeeds; ++s) {
        Vec u = delta;
        if (s > 0 && n == 2) {
            const double th = 2.0 * M_PI * s / kSeeds;
            const double c = std::cos(th), sn = std::sin(th);
            u = Vec{c * delta[0] - sn * delta[1], sn * delta[0] + c * delta[1]};
        } else if (s > 0) {
            u = delta * (0.25 + 0.25 * s);
        }
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            Mat jac;
            Vec end;
            try {
                shoot_end(u, jac, end);
            } catch (const BlowUp&) {
                break;
            }
            const Vec g = end - q2.x;
            if (g.norm() < 1e-10 * (1.0 + q2.x.norm())) {
                converged = true;
                break;
            }
            Vec step;
            try {
                step = jac.inverse() * g;
            } catch (const std::runtime_error&) {
                break;
            }
            double lam = 1.0;
            bool moved = false;
            for (int bt = 0; bt < 12; ++bt) {
                const Vec trial = u - lam * step;
                Mat jt;
                Vec et;
                try {
                    shoot_end(trial, jt, et);
                } catch (const BlowUp&) {
                    lam *= 0.5;
                    continue;
                }
                if ((et - q2.x).norm() < g.norm()) {
                    u = trial;
                    moved = true;
                    break;
                }
                lam *= 0.5;
            }
            if (!moved) break;
        }
        if (converged) {
            GeomJet<double> jet;
            model.geom(q1.chart, q1.x.a.data(), tau, jet);
            double len2 = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) len2 += jet.g[i][j] * u[i] * u[j];
            best = std::min(best, std::sqrt(len2));
        }
    }
    if (!std::isfinite(best))
        throw BvpNoConvergence("fixed-time geodesic multistart exhausted on " + handle.name());
    return best;
}

}  // namespace detail

// Distance from a rotational symmetry center, closed form on every built-in
// model (on the cigar the radial lower bound ds >= dr/sqrt(a+r^2) is attained
// by the radial segment).  Falls back to the generic distance elsewhere.
inline double riemannian_distance(const FlowModel& m, const ChartPoint& q1, const ChartPoint& q2,
                                  double tau);

inline double distance_from_center(const FlowModel& m, const ChartPoint& center,
                                   const ChartPoint& q, double tau) {
    if (!m.is_symmetry_center(center)) return riemannian_distance(m, center, q, tau);
    return m.visit([&](const auto& mm) -> double {
        using M = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<M, CigarModel>) {
            const double sa = std::sqrt(mm.a_of(tau));
            return std::asinh(q.x.norm() / sa);
        } else if constexpr (std::is_same_v<M, Rescaled<CigarModel>>) {
            const double sa = std::sqrt(mm.base.a_of(mm.scale * tau));
            return std::asinh(q.x.norm() / sa) / std::sqrt(mm.scale);
        } else {
            return riemannian_distance(m, center, q, tau);
        }
    });
}

inline double riemannian_distance(const FlowModel& m, const ChartPoint& q1, const ChartPoint& q2,
                                  double tau) {
    require_time(m, tau);
    require_point(m, q1);
    require_point(m, q2);
    return m.visit([&](const auto& mm) -> double {
        using M = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<M, FlatModel>) {
            return (q2.x - q1.x).norm();
        } else if constexpr (std::is_same_v<M, SphereModel>) {
            return std::sqrt(mm.rho2(tau)) * detail::sphere_angle(mm.n, q1, q2);
        } else if constexpr (std::is_same_v<M, CylinderModel>) {
            const ChartPoint s1{q1.chart, Vec{q1.x[0], q1.x[1]}};
            const ChartPoint s2{q2.chart, Vec{q2.x[0], q2.x[1]}};
            const double arc = std::sqrt(mm.rho2(tau)) * detail::sphere_angle(2, s1, s2);
            const double dz = q2.x[2] - q1.x[2];
            return std::sqrt(arc * arc + dz * dz);
        } else if constexpr (std::is_same_v<M, CigarModel>) {
            return detail::geodesic_bvp_distance(mm, m, q1, q2, tau);
        } else {
            // rescaled model: lengths scale by a^{-1/2} at time a*tau
            FlowModel basem(typename FlowModel::Variant(mm.base));
            return riemannian_distance(basem, q1, q2, mm.scale * tau) / std::sqrt(mm.scale);
        }
    });
}

}  // namespace rgl
