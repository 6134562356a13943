#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "rgl/core/lbfgs.hpp"
#include "rgl/core/rng.hpp"
#include "rgl/errors.hpp"
#include "rgl/lgeodesic.hpp"

// The reduced distance l(q, tau): multistart shooting boundary-value solver
// over the initial vector, cross-checked by a direct discrete path-energy
// minimizer.  Minimality is certified numerically: the returned branch beats
// every other converged branch, global optimality rests on the multistart
// budget plus the oracle.

namespace rgl {

struct LBranch {
    Vec v;
    double energy = 0.0;    // curve energy of the branch
    double jacobian = 0.0;  // signed exp-map Jacobian at the endpoint
    double residual = 0.0;  // endpoint position residual
};

enum class LMethod { shooting, path_oracle };

struct LResult {
    double l_value = 0.0;
    Vec minimizer_v;
    std::vector<LBranch> branches;  // all distinct converged solutions, cheapest first
    LMethod method = LMethod::shooting;
    double best_residual = INFINITY;
    int multistart_count = 0;
    double branch_gap = INFINITY;  // l-gap to the second-best branch
    double oracle_l = std::numeric_limits<double>::quiet_NaN();
    double tau = 0.0;

    bool unique_minimum(double gap_tol = 1e-6) const { return branch_gap > gap_tol; }
};

struct SolveOptions {
    int multistart = 32;
    double position_tol = 1e-7;
    int max_newton = 40;
    uint64_t seed = 20240101;
    bool with_oracle = false;
    int oracle_knots = 64;
    double cross_check_tol = 1e-4;
    ShootOptions shoot;
};

namespace detail {

// Express a trajectory endpoint (and its v-derivative) in the requested chart.
inline void endpoint_in_chart(const FlowModel& m, const TauSample& s, int chart, Vec& x_out,
                              Mat* dx_out) {
    const int n = s.x.n;
    if (s.chart == chart) {
        x_out = s.x;
        if (dx_out) *dx_out = s.dx_dv;
        return;
    }
    // lift through the transition with dual seeding to move the derivative
    std::array<Dual, 3> xd;
    for (int i = 0; i < n; ++i) xd[i] = Dual::seeded(s.x[i], i);
    std::array<Dual, 3> yd;
    m.visit([&](const auto& mm) { mm.transition(s.chart, chart, xd.data(), yd.data()); });
    x_out = Vec(n);
    Mat dT(n);
    for (int i = 0; i < n; ++i) {
        x_out[i] = yd[i].v;
        for (int j = 0; j < n; ++j) dT.at(i, j) = yd[i].d[j];
    }
    if (dx_out) *dx_out = dT * s.dx_dv;
}

struct NewtonOutcome {
    Vec v;
    double energy = 0.0;
    double jacobian = 0.0;
    double residual = INFINITY;
    bool converged = false;
};

inline NewtonOutcome newton_branch(const FlowModel& m, const ChartPoint& p, const ChartPoint& q,
                                   double tau, Vec v, const SolveOptions& opt) {
    NewtonOutcome out;
    ShootOptions sh = opt.shoot;
    sh.record_path = false;
    const double qscale = 1.0 + q.x.norm();

    auto eval = [&](const Vec& vv, bool with_jac, Vec& resid, Mat& jac, double& energy,
                    double& expjac) -> bool {
        try {
            const LGeodesic g = shoot(m, p, vv, tau, 0.0, with_jac, sh);
            Vec xq;
            Mat dxq;
            endpoint_in_chart(m, g.end(), q.chart, xq, with_jac ? &dxq : nullptr);
            resid = xq - q.x;
            energy = g.energy();
            if (with_jac) {
                jac = dxq;
                expjac = exp_jacobian(m, p, g.end());
            }
            return true;
        } catch (const BlowUp&) {
            return false;
        } catch (const OutOfChart&) {
            return false;
        }
    };

    Vec resid;
    Mat jac;
    double energy = 0, expjac = 0;
    if (!eval(v, true, resid, jac, energy, expjac)) return out;

    double best_seen = resid.norm();
    for (int it = 0; it < opt.max_newton; ++it) {
        out.residual = resid.norm();
        if (out.residual < opt.position_tol * qscale) {
            out.converged = true;
            out.v = v;
            out.energy = energy;
            out.jacobian = expjac;
            return out;
        }
        best_seen = std::min(best_seen, out.residual);
        if (out.residual > 1e4 * qscale || out.residual > 32.0 * best_seen)
            return out;  // wandering seed, give up early
        Vec step;
        try {
            step = jac.inverse() * resid;
        } catch (const std::runtime_error&) {
            return out;  // singular differential: conjugate-point territory
        }
        // damped update; cheap value-only shoots while backtracking
        double lam = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 5; ++bt) {
            const Vec trial = v - lam * step;
            if (trial.norm() > 64.0) {
                lam *= 0.5;
                continue;
            }
            Vec r2;
            Mat j2;
            double e2 = 0, x2 = 0;
            if (eval(trial, false, r2, j2, e2, x2) && r2.norm() < resid.norm()) {
                v = trial;
                moved = true;
                break;
            }
            lam *= 0.5;
        }
        if (!moved) return out;
        if (!eval(v, true, resid, jac, energy, expjac)) return out;
    }
    out.residual = resid.norm();
    return out;
}

inline std::optional<Vec> point_in_chart(const FlowModel& m, const ChartPoint& q, int chart) {
    if (q.chart == chart) return q.x;
    if (q.x.norm() < 1e-9) return std::nullopt;  // the other chart's origin has no image
    return m.transition_point(q.chart, chart, q.x);
}

// Shared multistart driver.  stop_below_energy, when finite, early-exits the
// seed loop as soon as a branch beats it (the mask builder only needs the
// existence of a cheaper branch, not the full enumeration).
struct MultistartOutcome {
    std::vector<LBranch> branches;  // cheapest first
    double best_residual = INFINITY;
};

template <class OptT>
MultistartOutcome multistart_branches(const FlowModel& m, const ChartPoint& p,
                                      const ChartPoint& q, double tau, const OptT& opt,
                                      double stop_below_energy = -INFINITY) {
    const int n = m.dim();
    const double sq = std::sqrt(tau);
    const auto q_in_p = point_in_chart(m, q, p.chart);
    Vec v_straight = Vec::zero(n);
    if (q_in_p && (*q_in_p).norm() < 1e3) v_straight = (*q_in_p - p.x) * (0.5 / sq);

    const CounterRng rng =
        CounterRng(opt.seed, "solve_l")
            .fork(hash_doubles({p.x[0], p.x[1], p.x[2], q.x[0], q.x[1], q.x[2],
                                static_cast<double>(q.chart), tau}));

    MultistartOutcome out;
    static constexpr double kRayScales[] = {1.0, 0.5, 1.5, 0.25, 2.0, 0.75, 1.25, 3.0};
    for (int s = 0; s < opt.multistart; ++s) {
        Vec seed_v(n);
        if (s < 8) {
            seed_v = v_straight * kRayScales[s];
        } else {
            const double mag = (0.25 + 1.75 * rng.uniform(2 * s)) * (v_straight.norm() + 1.0);
            seed_v = v_straight + mag * rng.unit_vector(n, 2 * s + 1);
        }
        const NewtonOutcome o = newton_branch(m, p, q, tau, seed_v, opt);
        out.best_residual = std::min(out.best_residual, o.residual);
        if (!o.converged) continue;
        bool duplicate = false;
        for (auto& b : out.branches)
            if ((b.v - o.v).norm() < 1e-6 * (1.0 + b.v.norm())) {
                duplicate = true;
                if (o.residual < b.residual) b = LBranch{o.v, o.energy, o.jacobian, o.residual};
                break;
            }
        if (!duplicate) out.branches.push_back(LBranch{o.v, o.energy, o.jacobian, o.residual});
        if (o.converged && o.energy < stop_below_energy) break;
    }
    std::sort(out.branches.begin(), out.branches.end(),
              [](const LBranch& a, const LBranch& b) { return a.energy < b.energy; });
    return out;
}

}  // namespace detail

inline double l_lower_bound_bracket(const FlowModel& m, const ChartPoint& p, const ChartPoint& q,
                                    double tau) {
    const double d0 = distance_from_center(m, p, q, 0.0);
    return d0 * d0 / (4.0 * tau);
}

inline LResult solve_l(const FlowModel& m, const ChartPoint& p, const ChartPoint& q, double tau,
                       const SolveOptions& opt = {});

// Discrete path-energy minimizer: quasi-Newton descent of
// sum(|dx/dt|^2/2 + 2 R t^2) dt over interior knots, straight-segment
// initialization plus random restarts.  Independent of the shooting path.
inline double path_oracle(const FlowModel& m, const ChartPoint& p, const ChartPoint& q,
                          double tau, int knots, uint64_t seed = 20240101) {
    if (knots < 16) throw std::invalid_argument("path_oracle: need at least 16 knots");
    require_time(m, tau);
    require_point(m, p);
    require_point(m, q);
    const int n = m.dim();
    const auto q_in_p = detail::point_in_chart(m, q, p.chart);
    if (!q_in_p) throw OutOfChart("path_oracle: endpoint not representable in the base chart");
    const int chart = p.chart;
    const double tb = std::sqrt(tau);
    const double dt = tb / knots;
    const int interior = knots - 1;

    // clamped straight-chart initialization
    std::vector<double> x0(static_cast<size_t>(interior) * n);
    const double clamp_r = 3.5;
    for (int j = 1; j < knots; ++j) {
        const double u = static_cast<double>(j) / knots;
        Vec xx = p.x + u * (*q_in_p - p.x);
        const double r = xx.norm();
        if (m.chart_count() > 1 && r > clamp_r) xx *= clamp_r / r;
        for (int c = 0; c < n; ++c) x0[static_cast<size_t>(j - 1) * n + c] = xx[c];
    }

    auto node = [&](const std::vector<double>& z, int j) -> Vec {
        if (j == 0) return p.x;
        if (j == knots) return *q_in_p;
        Vec xx(n);
        for (int c = 0; c < n; ++c) xx[c] = z[static_cast<size_t>(j - 1) * n + c];
        return xx;
    };

    auto objective = [&](const std::vector<double>& z, std::vector<double>& grad) -> double {
        std::fill(grad.begin(), grad.end(), 0.0);
        double total = 0;
        // potential: trapezoid over nodes
        for (int j = 0; j <= knots; ++j) {
            const Vec xj = node(z, j);
            if (m.chart_count() > 1 && xj.norm() > 3.9) return INFINITY;
            const double tj = j * dt;
            const double wj = (j == 0 || j == knots) ? 0.5 : 1.0;
            std::array<Dual, 3> xd;
            for (int c = 0; c < n; ++c) xd[c] = Dual::seeded(xj[c], c);
            GeomJet<Dual> jet;
            m.visit([&](const auto& mm) { mm.geom(chart, xd.data(), tj * tj, jet); });
            total += 2.0 * jet.scalar.v * tj * tj * wj * dt;
            if (j > 0 && j < knots)
                for (int c = 0; c < n; ++c)
                    grad[static_cast<size_t>(j - 1) * n + c] +=
                        2.0 * jet.scalar.d[c] * tj * tj * wj * dt;
        }
        // kinetic: midpoint metric per segment
        for (int j = 0; j < knots; ++j) {
            const Vec a = node(z, j), b = node(z, j + 1);
            const Vec d = b - a;
            const Vec mid = 0.5 * (a + b);
            const double tm = (j + 0.5) * dt;
            std::array<Dual, 3> xd;
            for (int c = 0; c < n; ++c) xd[c] = Dual::seeded(mid[c], c);
            GeomJet<Dual> jet;
            m.visit([&](const auto& mm) { mm.geom(chart, xd.data(), tm * tm, jet); });
            Dual kin(0.0);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) kin += jet.g[i][k] * d[i] * d[k];
            total += 0.5 * kin.v / dt;
            // mid-point dependence (factor 1/2 toward each neighbor knot)
            for (int c = 0; c < n; ++c) {
                const double gmid = 0.25 * kin.d[c] / dt;
                if (j >= 1) grad[static_cast<size_t>(j - 1) * n + c] += gmid;
                if (j + 1 <= interior) grad[static_cast<size_t>(j)*n + c] += gmid;
            }
            // endpoint dependence through d
            Vec gd(n);
            for (int c = 0; c < n; ++c) {
                double s = 0;
                for (int k = 0; k < n; ++k) s += jet.g[c][k].v * d[k];
                gd[c] = s / dt;
            }
            for (int c = 0; c < n; ++c) {
                if (j >= 1) grad[static_cast<size_t>(j - 1) * n + c] -= gd[c];
                if (j + 1 <= interior) grad[static_cast<size_t>(j)*n + c] += gd[c];
            }
        }
        return total;
    };

    const CounterRng rng = CounterRng(seed, "path_oracle")
                               .fork(hash_doubles({p.x[0], p.x[1], p.x[2], (*q_in_p)[0],
                                                   (*q_in_p)[1], (*q_in_p)[2], tau,
                                                   static_cast<double>(knots)}));
    double best = INFINITY;
    const double spread = 0.05 * ((*q_in_p - p.x).norm() + 1.0);
    for (int init = 0; init < 9; ++init) {
        std::vector<double> z = x0;
        if (init > 0) {
            for (size_t k = 0; k < z.size(); ++k)
                z[k] += spread * (rng.uniform(init * 4096 + k) - 0.5);
        }
        LbfgsOptions lo;
        lo.max_iterations = 400;
        try {
            const LbfgsResult r = lbfgs_minimize(objective, z, lo);
            best = std::min(best, r.value);
        } catch (const LineSearchFailure&) {
            if (init == 8 && !std::isfinite(best)) throw;
        }
    }
    return best / (2.0 * tb);
}

inline LResult solve_l(const FlowModel& m, const ChartPoint& p, const ChartPoint& q, double tau,
                       const SolveOptions& opt) {
    require_time(m, tau);
    if (!(tau > 0)) throw TimeOutOfRange("solve_l needs tau > 0");
    require_point(m, p);
    require_point(m, q);
    const double sq = std::sqrt(tau);

    LResult res;
    res.tau = tau;
    res.multistart_count = opt.multistart;
    detail::MultistartOutcome ms = detail::multistart_branches(m, p, q, tau, opt);
    res.branches = std::move(ms.branches);
    res.best_residual = ms.best_residual;
    if (res.branches.empty())
        throw BvpNoConvergence("no multistart seed converged for " + m.name() +
                               " (best residual " + std::to_string(res.best_residual) + ")");
    res.l_value = res.branches.front().energy / (2.0 * sq);
    res.minimizer_v = res.branches.front().v;
    if (res.branches.size() > 1)
        res.branch_gap = (res.branches[1].energy - res.branches[0].energy) / (2.0 * sq);

    // Ricci >= 0 lower bracket: any geodesic energy dominates d^2(p,q,0)/(4 tau)
    if (m.is_symmetry_center(p)) {
        const double lb = l_lower_bound_bracket(m, p, q, tau);
        if (res.l_value < lb - 1e-6 * (1.0 + std::fabs(res.l_value)))
            throw ToleranceViolation("solve_l below the distance lower bracket on " + m.name());
    }

    if (opt.with_oracle) {
        res.oracle_l = path_oracle(m, p, q, tau, opt.oracle_knots, opt.seed);
        const double denom = std::max(std::fabs(res.l_value), 1e-2);
        if (std::fabs(res.oracle_l - res.l_value) > opt.cross_check_tol * denom * 10.0)
            throw ToleranceViolation("shooting vs path oracle disagree: " +
                                     std::to_string(res.l_value) + " vs " +
                                     std::to_string(res.oracle_l));
    }
    return res;
}

// Minimality probe for the injectivity-domain mask: does any geodesic branch
// reach q at time tau with reduced length below l_threshold - margin?
inline bool cheaper_branch_exists(const FlowModel& m, const ChartPoint& p, const ChartPoint& q,
                                  double tau, double l_threshold, double margin = 1e-6,
                                  const SolveOptions& opt = {}) {
    const double stop_energy = (l_threshold - margin) * 2.0 * std::sqrt(tau);
    const detail::MultistartOutcome ms =
        detail::multistart_branches(m, p, q, tau, opt, stop_energy);
    return !ms.branches.empty() && ms.branches.front().energy < stop_energy;
}

// gradient of l at q: the terminal velocity gamma_dot(tau) of the unique
// minimizing geodesic, expressed in q's chart.
inline Vec grad_l(const FlowModel& m, const ChartPoint& p, const ChartPoint& q, double tau,
                  const SolveOptions& opt = {}) {
    const LResult r = solve_l(m, p, q, tau, opt);
    if (!r.unique_minimum())
        throw CutLocusSuspected("branch gap " + std::to_string(r.branch_gap) + " below threshold");
    const double jscale = std::pow(2.0 * std::sqrt(tau), m.dim());
    if (std::fabs(r.branches.front().jacobian) < 1e-8 * jscale)
        throw CutLocusSuspected("endpoint numerically conjugate to the base point");
    ShootOptions sh = opt.shoot;
    sh.record_path = false;
    const LGeodesic g = shoot(m, p, r.minimizer_v, tau, 0.0, false, sh);
    Vec w_q;
    // velocity components follow the position transition
    if (g.end().chart == q.chart) {
        w_q = g.end().w;
    } else {
        std::array<Dual, 3> xd, wd;
        for (int i = 0; i < m.dim(); ++i) {
            xd[i] = Dual(g.end().x[i]);
            wd[i] = Dual(g.end().w[i]);
        }
        m.visit([&](const auto& mm) { mm.transition_state(g.end().chart, q.chart, xd.data(), wd.data()); });
        w_q = Vec(m.dim());
        for (int i = 0; i < m.dim(); ++i) w_q[i] = wd[i].v;
    }
    return w_q * (0.5 / std::sqrt(tau));
}

// central difference of l in tau
inline double l_tau(const FlowModel& m, const ChartPoint& p, const ChartPoint& q, double tau,
                    double h = 0.0, const SolveOptions& opt = {}) {
    if (h <= 0) h = 1e-3 * tau;
    if (h > 1e-3 * tau + 1e-15) throw std::invalid_argument("l_tau: step must be <= 1e-3 tau");
    require_time(m, tau + h);
    if (!(tau - h > 0)) throw TimeOutOfRange("l_tau: tau - h must stay positive");
    const double lp = solve_l(m, p, q, tau + h, opt).l_value;
    const double lm = solve_l(m, p, q, tau - h, opt).l_value;
    return (lp - lm) / (2.0 * h);
}

struct MinLResult {
    ChartPoint q_star;
    double l_star = 0.0;
    Vec v_star;
};

// Multistart descent of v -> l(gamma_v(tau), tau) with exact dual gradients;
// seeds at the base point plus random points in the radius-4 sqrt(tau) ball
// mapped through the straight-chart heuristic.
inline MinLResult min_l(const FlowModel& m, const ChartPoint& p, double tau,
                        uint64_t seed = 20240101, int extra_seeds = 16) {
    require_time(m, tau);
    if (!(tau > 0)) throw TimeOutOfRange("min_l needs tau > 0");
    const int n = m.dim();
    const double sq = std::sqrt(tau);
    ShootOptions sh;
    sh.record_path = false;

    // dual integration with the energy partials kept: dl/dv = (dE/dv)/(2 sqrt(tau))
    auto value_and_grad = [&](const Vec& v, Vec& grad) -> double {
        return m.visit([&](const auto& mm) -> double {
            const int nn = mm.dim();
            std::array<Dual, kMaxState> y;
            for (int i = 0; i < nn; ++i) {
                y[i] = Dual(p.x[i]);
                y[nn + i] = 2.0 * Dual::seeded(v[i], i);
            }
            y[2 * nn] = Dual(0.0);
            detail::LGeodesicRhs<Dual, std::decay_t<decltype(mm)>> rhs{mm, p.chart};
            OdeOptions ode;
            ode.rtol = sh.rtol;
            ode.atol = sh.atol;
            auto cb = [&](double, Dual* yy) {
                Vec xv(nn);
                for (int i = 0; i < nn; ++i) xv[i] = yy[i].v;
                const int target = mm.switch_target(rhs.chart, xv);
                if (target >= 0) {
                    mm.transition_state(rhs.chart, target, yy, yy + nn);
                    rhs.chart = target;
                }
                return true;
            };
            integrate_dopri<Dual>(rhs, y.data(), 2 * nn + 1, 0.0, sq, ode, cb);
            grad = Vec(nn);
            for (int i = 0; i < nn; ++i) grad[i] = y[2 * nn].d[i] / (2.0 * sq);
            return y[2 * nn].v / (2.0 * sq);
        });
    };

    const CounterRng rng = CounterRng(seed, "min_l").fork(
        hash_doubles({p.x[0], p.x[1], p.x[2], tau, static_cast<double>(p.chart)}));
    const auto jet_p = geom_jet(m, p, tau);
    double gscale = 0;
    for (int i = 0; i < n; ++i) gscale += jet_p.g[i][i];
    gscale = std::sqrt(gscale / n);
    const double chart_radius = 4.0 * sq / std::max(gscale, 1e-8);

    MinLResult best;
    best.l_star = INFINITY;
    for (int s = 0; s <= extra_seeds; ++s) {
        Vec v0 = Vec::zero(n);
        if (s > 0) {
            const Vec dx = rng.in_ball(n, static_cast<uint64_t>(s), chart_radius);
            v0 = dx * (0.5 / sq);
        }
        Vec g0(n);
        if (!std::isfinite(value_and_grad(v0, g0))) continue;
        std::vector<double> z(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) z[i] = v0[i];
        auto obj = [&](const std::vector<double>& zz, std::vector<double>& gg) -> double {
            Vec vv(n), gr(n);
            for (int i = 0; i < n; ++i) vv[i] = zz[i];
            double val;
            try {
                val = value_and_grad(vv, gr);
            } catch (const BlowUp&) {
                return INFINITY;
            }
            for (int i = 0; i < n; ++i) gg[static_cast<size_t>(i)] = gr[i];
            return val;
        };
        LbfgsOptions lo;
        lo.max_iterations = 120;
        lo.grad_tol = 1e-9;
        try {
            const LbfgsResult r = lbfgs_minimize(obj, z, lo);
            if (r.value < best.l_star) {
                best.l_star = r.value;
                best.v_star = Vec(n);
                for (int i = 0; i < n; ++i) best.v_star[i] = z[static_cast<size_t>(i)];
            }
        } catch (const LineSearchFailure&) {
            continue;
        }
    }
    if (!std::isfinite(best.l_star)) throw BvpNoConvergence("min_l: every descent seed failed");
    best.q_star = lexp(m, p, best.v_star, tau);
    return best;
}

}  // namespace rgl
