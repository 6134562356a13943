#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rgl/core/dual.hpp"
#include "rgl/core/ode.hpp"
#include "rgl/errors.hpp"
#include "rgl/geometry.hpp"
#include "rgl/models/flow_models.hpp"

// Integration of the geodesic flow in the desingularized t = sqrt(s)
// parametrization:
//
//   d/dt gamma' = -Gamma(gamma', gamma') + 2 t^2 grad R - 4 t Ric(gamma', .)
//
// with gamma'(0) = 2v.  The accumulated curve energy
// int (|gamma'|^2/2 + 2 R t^2) dt rides along as an extra state component, and
// in Jacobi mode the whole state is integrated over dual numbers seeded with
// d gamma'(0)/dv = 2 I, which transports the variational frame with the same
// step sequence and tolerance as the base trajectory.

namespace rgl {

struct ShootOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    uint64_t max_steps = 1000000;
    bool record_path = true;
    std::vector<double> record_taus;  // strictly inside (eps, tau_end], ascending
};

struct GeodesicKnot {
    double t = 0.0;
    int chart = 0;
    Vec x;
    Vec w;  // gamma' in chart coordinates
    double energy = 0.0;
};

// Trajectory snapshot at a requested tau, including the variational state
// when shot with Jacobi transport.
struct TauSample {
    double tau = 0.0;
    int chart = 0;
    Vec x;
    Vec w;
    double energy = 0.0;
    bool has_jacobi = false;
    Mat dx_dv;  // columns: d x / d v_j, chart coordinates
    Mat dw_dv;
    double orient = 1.0;  // sign correction across orientation-reversing chart swaps
};

struct LGeodesic {
    int dim = 0;
    ChartPoint base;
    Vec v;
    double eps = 0.0;
    double tau_end = 0.0;
    std::vector<GeodesicKnot> knots;
    std::vector<TauSample> samples;  // one per requested tau, tau_end last

    const TauSample& end() const { return samples.back(); }
    double energy() const { return samples.back().energy; }
    // reduced length of this particular trajectory (not necessarily minimal)
    double l_shot() const { return energy() / (2.0 * std::sqrt(tau_end)); }
};

namespace detail {

template <class S, class M>
struct LGeodesicRhs {
    const M& model;
    int chart;  // mutated on chart switches

    void operator()(double t, const S* y, S* dy) const {
        const int n = model.dim();
        GeomJet<S> jet;
        model.geom(chart, y, t * t, jet);
        for (int i = 0; i < n; ++i) dy[i] = y[n + i];
        for (int k = 0; k < n; ++k) {
            S acc(0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += jet.gamma[k][i][j] * y[n + i] * y[n + j];
            S ricw(0.0);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) ricw += jet.ginv[k][a] * jet.ric[a][b] * y[n + b];
            dy[n + k] = -acc + (2.0 * t * t) * jet.grad_scalar[k] - (4.0 * t) * ricw;
        }
        S kin(0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) kin += jet.g[i][j] * y[n + i] * y[n + j];
        dy[2 * n] = 0.5 * kin + (2.0 * t * t) * jet.scalar;
    }
};

template <class S, class M>
LGeodesic shoot_impl(const M& model, const ChartPoint& p, const Vec& v, double tau_end,
                     double eps, const ShootOptions& opt) {
    const int n = model.dim();
    LGeodesic out;
    out.dim = n;
    out.base = p;
    out.v = v;
    out.eps = eps;
    out.tau_end = tau_end;

    std::array<S, kMaxState> y;
    for (int i = 0; i < n; ++i) {
        y[i] = S(p.x[i]);
        if constexpr (std::is_same_v<S, Dual>) {
            y[n + i] = 2.0 * Dual::seeded(v[i], i);
        } else {
            y[n + i] = 2.0 * v[i];
        }
    }
    y[2 * n] = S(0.0);

    LGeodesicRhs<S, M> rhs{model, p.chart};
    double orient = 1.0;

    auto snapshot_knot = [&](double t) {
        GeodesicKnot k;
        k.t = t;
        k.chart = rhs.chart;
        k.x = Vec(n);
        k.w = Vec(n);
        for (int i = 0; i < n; ++i) {
            k.x[i] = value_of(y[i]);
            k.w[i] = value_of(y[n + i]);
        }
        k.energy = value_of(y[2 * n]);
        out.knots.push_back(k);
    };

    auto maybe_switch = [&](double t) {
        Vec xv(n);
        for (int i = 0; i < n; ++i) xv[i] = value_of(y[i]);
        const int target = model.switch_target(rhs.chart, xv);
        if (target < 0) return;
        if (opt.record_path) snapshot_knot(t);
        model.transition_state(rhs.chart, target, y.data(), y.data() + n);
        orient *= model.transition_det_sign();
        rhs.chart = target;
        if (opt.record_path) snapshot_knot(t);
    };

    auto step_cb = [&](double t, S*) {
        maybe_switch(t);
        if (opt.record_path && (out.knots.empty() || out.knots.back().t < t)) snapshot_knot(t);
        return true;
    };

    OdeOptions ode;
    ode.rtol = opt.rtol;
    ode.atol = opt.atol;
    ode.max_steps = opt.max_steps;

    std::vector<double> taus = opt.record_taus;
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    if (taus.empty() || std::fabs(taus.back() - tau_end) > 1e-15) taus.push_back(tau_end);

    if (opt.record_path) snapshot_knot(std::sqrt(eps));

    double t_cur = std::sqrt(eps);
    for (double tau : taus) {
        if (!(tau > eps) || tau > tau_end + 1e-15)
            throw TimeOutOfRange("record tau outside (eps, tau_end]");
        const double t_next = std::sqrt(tau);
        if (t_next > t_cur + 1e-15)
            integrate_dopri<S>(rhs, y.data(), 2 * n + 1, t_cur, t_next, ode, step_cb);
        t_cur = t_next;

        TauSample s;
        s.tau = tau;
        s.chart = rhs.chart;
        s.x = Vec(n);
        s.w = Vec(n);
        for (int i = 0; i < n; ++i) {
            s.x[i] = value_of(y[i]);
            s.w[i] = value_of(y[n + i]);
        }
        s.energy = value_of(y[2 * n]);
        s.orient = orient;
        if constexpr (std::is_same_v<S, Dual>) {
            s.has_jacobi = true;
            s.dx_dv = Mat(n);
            s.dw_dv = Mat(n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    s.dx_dv.at(i, j) = y[i].d[j];
                    s.dw_dv.at(i, j) = y[n + i].d[j];
                }
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace detail

inline LGeodesic shoot(const FlowModel& m, const ChartPoint& p, const Vec& v, double tau_end,
                       double eps = 0.0, bool with_jacobi = false,
                       const ShootOptions& opt = {}) {
    require_point(m, p);
    require_time(m, tau_end);
    if (!(tau_end > eps) || eps < 0.0)
        throw TimeOutOfRange("need 0 <= eps < tau_end < T");
    for (int i = 0; i < v.n; ++i)
        if (!std::isfinite(v[i])) throw BlowUp("non-finite initial vector");
    return m.visit([&](const auto& mm) {
        if (with_jacobi) return detail::shoot_impl<Dual>(mm, p, v, tau_end, eps, opt);
        return detail::shoot_impl<double>(mm, p, v, tau_end, eps, opt);
    });
}

inline ChartPoint lexp(const FlowModel& m, const ChartPoint& p, const Vec& v, double tau) {
    ShootOptions opt;
    opt.record_path = false;
    const LGeodesic g = shoot(m, p, v, tau, 0.0, false, opt);
    return ChartPoint{g.end().chart, g.end().x};
}

// Signed Jacobian of the exp map at a trajectory snapshot, with orthonormal
// frames taken under g(tau) at the base point and at the endpoint.  Positive
// until the first conjugate point; sign flips of det(dx/dv) caused by
// orientation-reversing chart transitions are compensated by `orient`.
inline double exp_jacobian(const FlowModel& m, const ChartPoint& p, const TauSample& s) {
    if (!s.has_jacobi) throw std::logic_error("exp_jacobian needs a Jacobi-transported sample");
    const auto jet_p = geom_jet(m, p, s.tau);
    const auto jet_q = geom_jet(m, ChartPoint{s.chart, s.x}, s.tau);
    Mat gp(m.dim()), gq(m.dim());
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j) {
            gp.at(i, j) = jet_p.g[i][j];
            gq.at(i, j) = jet_q.g[i][j];
        }
    return s.orient * s.dx_dv.det() * std::sqrt(gq.det() / gp.det());
}

// J(tau) samples along one shot geodesic.
inline std::vector<double> jacobian(const FlowModel& m, const ChartPoint& p, const Vec& v,
                                    const std::vector<double>& tau_grid) {
    ShootOptions opt;
    opt.record_path = false;
    opt.record_taus = tau_grid;
    const double tau_max = *std::max_element(tau_grid.begin(), tau_grid.end());
    const LGeodesic g = shoot(m, p, v, tau_max, 0.0, true, opt);
    std::vector<double> out;
    out.reserve(tau_grid.size());
    std::vector<double> sorted = tau_grid;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size(); ++i) out.push_back(exp_jacobian(m, p, g.samples[i]));
    return out;
}

// Curve energy int (|gamma'|^2/2 + 2 R t^2) dt of a discrete path over
// t in [sqrt(a), sqrt(b)], composite two-point Gauss on the knot segments.
inline double l_energy(const FlowModel& m, const PointPath& path, double a, double b) {
    const double ta = std::sqrt(a), tb = std::sqrt(b);
    if (path.knots.size() < 2) throw std::invalid_argument("l_energy: need at least two knots");
    if (std::fabs(path.knots.front().t - ta) > 1e-9 || std::fabs(path.knots.back().t - tb) > 1e-9)
        throw std::invalid_argument("l_energy: path does not span [sqrt(a), sqrt(b)]");
    const int n = m.dim();
    const double xi1 = 0.5 - 0.5 / std::sqrt(3.0), xi2 = 0.5 + 0.5 / std::sqrt(3.0);
    double total = 0;
    for (size_t k = 0; k + 1 < path.knots.size(); ++k) {
        const PathKnot& k0 = path.knots[k];
        PathKnot k1 = path.knots[k + 1];
        const double dt = k1.t - k0.t;
        if (dt <= 0) continue;  // transition marker
        if (k1.chart != k0.chart) k1.x = m.transition_point(k1.chart, k0.chart, k1.x);
        const Vec w = (k1.x - k0.x) * (1.0 / dt);
        for (double xi : {xi1, xi2}) {
            const double t = k0.t + xi * dt;
            Vec x = k0.x + xi * (k1.x - k0.x);
            if (!m.chart_contains(k0.chart, x))
                throw OutOfChart("l_energy: interpolated point left chart domain");
            const auto jet = geom_jet(m, ChartPoint{k0.chart, x}, t * t);
            double kin = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) kin += jet.g[i][j] * w[i] * w[j];
            total += 0.5 * dt * (0.5 * kin + 2.0 * jet.scalar * t * t);
        }
    }
    return total;
}

// Straight-segment path builder used by tests and the oracle initialization.
inline PointPath straight_path(const ChartPoint& p, const ChartPoint& q, double a, double b,
                               int knot_count) {
    if (p.chart != q.chart) throw OutOfChart("straight_path: endpoints must share a chart");
    PointPath path;
    path.param_a = a;
    path.param_b = b;
    const double ta = std::sqrt(a), tb = std::sqrt(b);
    for (int k = 0; k < knot_count; ++k) {
        const double u = static_cast<double>(k) / (knot_count - 1);
        PathKnot kn;
        kn.t = ta + u * (tb - ta);
        kn.chart = p.chart;
        kn.x = p.x + u * (q.x - p.x);
        path.knots.push_back(kn);
    }
    return path;
}

}  // namespace rgl
