#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include "rgl/core/dual.hpp"
#include "rgl/core/small_linalg.hpp"
#include "rgl/errors.hpp"

// Explicit complete solutions of the backward flow dg/dtau = 2 Ric with
// closed-form metric, curvature, and Christoffel evaluators in coordinate
// charts.  Evaluators are templated on the scalar so the same closed forms
// drive both plain trajectories and dual-number variational transport.

namespace rgl {

struct ChartPoint {
    int chart = 0;
    Vec x;
};

enum class CurvatureClass { nonneg_curvature_operator, bounded_sectional, ricci_lower_bound };

// Full local geometry at one (chart point, tau): metric, inverse, volume
// density, Christoffels (upper index first), Ricci, scalar curvature and its
// raised gradient.
template <class S>
struct GeomJet {
    int n = 0;
    S g[3][3];
    S ginv[3][3];
    S sqrt_det;
    S gamma[3][3][3];
    S ric[3][3];
    S scalar;
    S grad_scalar[3];

    void clear(int dim) {
        n = dim;
        for (int i = 0; i < 3; ++i) {
            grad_scalar[i] = S(0.0);
            for (int j = 0; j < 3; ++j) {
                g[i][j] = S(0.0);
                ginv[i][j] = S(0.0);
                ric[i][j] = S(0.0);
                for (int k = 0; k < 3; ++k) gamma[i][j][k] = S(0.0);
            }
        }
        sqrt_det = S(0.0);
        scalar = S(0.0);
    }
};

namespace detail {

// Christoffels of a conformal block e^{2phi} * delta over the first nb
// coordinates: Gamma^k_ij = d_i phi delta_jk + d_j phi delta_ik - d_k phi delta_ij.
template <class S>
void conformal_gamma(int nb, const S dphi[3], GeomJet<S>& jet) {
    for (int k = 0; k < nb; ++k)
        for (int i = 0; i < nb; ++i)
            for (int j = 0; j < nb; ++j) {
                S v(0.0);
                if (k == i) v += dphi[j];
                if (k == j) v += dphi[i];
                if (i == j) v -= dphi[k];
                jet.gamma[k][i][j] = v;
            }
}

inline std::string fmt_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// flat(n): g(tau) = euclidean metric, the static trivial solution.
struct FlatModel {
    int n = 2;

    int dim() const { return n; }
    double time_horizon() const { return INFINITY; }
    std::string name() const { return "flat:" + std::to_string(n); }
    CurvatureClass curvature_class() const { return CurvatureClass::nonneg_curvature_operator; }
    bool scalar_flat() const { return true; }
    double scalar_min(double) const { return 0.0; }
    uint64_t direction_class_key(const Vec&) const { return 0; }

    int chart_count() const { return 1; }
    bool chart_contains(int chart, const Vec&) const { return chart == 0; }
    int switch_target(int, const Vec&) const { return -1; }
    bool is_symmetry_center(int, const Vec&) const { return true; }

    template <class S>
    void transition(int, int, const S*, S*) const {
        throw OutOfChart("flat model has a single chart");
    }
    template <class S>
    void transition_state(int, int, S*, S*) const {
        throw OutOfChart("flat model has a single chart");
    }
    double transition_det_sign() const { return 1.0; }

    template <class S>
    void geom(int, const S* /*x*/, double /*tau*/, GeomJet<S>& jet) const {
        jet.clear(n);
        for (int i = 0; i < n; ++i) {
            jet.g[i][i] = S(1.0);
            jet.ginv[i][i] = S(1.0);
        }
        jet.sqrt_det = S(1.0);
    }
};

namespace detail {

// Shared two-chart stereographic atlas of S^k: psi = 2/(1+|x|^2), the charts
// cover the two poles and are glued by the inversion x -> x/|x|^2.
// Integrators swap charts once a trajectory exits coordinate radius 2.
inline constexpr double kChartDomainRadius = 4.0;
inline constexpr double kChartSwitchRadius = 2.0;

template <class S>
void stereographic_inversion(int nb, const S* in, S* out) {
    S r2(0.0);
    for (int i = 0; i < nb; ++i) r2 += in[i] * in[i];
    for (int i = 0; i < nb; ++i) out[i] = in[i] / r2;
}

// Push (position, velocity) through the inversion; dT applied in S arithmetic
// so dual partials pick up the full second-derivative chain.
template <class S>
void stereographic_inversion_state(int nb, S* x, S* w) {
    S r2(0.0), xw(0.0);
    for (int i = 0; i < nb; ++i) {
        r2 += x[i] * x[i];
        xw += x[i] * w[i];
    }
    const S inv = 1.0 / r2;
    for (int i = 0; i < nb; ++i) {
        w[i] = w[i] * inv - 2.0 * x[i] * xw * inv * inv;
        x[i] = x[i] * inv;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// sphere(n, r0): round S^n with g(tau) = (r0^2 + 2(n-1)tau) * g_{S^n(1)}.
struct SphereModel {
    int n = 2;
    double r0 = 1.0;

    double rho2(double tau) const { return r0 * r0 + 2.0 * (n - 1) * tau; }

    int dim() const { return n; }
    double time_horizon() const { return INFINITY; }
    std::string name() const {
        return "sphere:" + std::to_string(n) + ":" + detail::fmt_param(r0);
    }
    CurvatureClass curvature_class() const { return CurvatureClass::nonneg_curvature_operator; }
    bool scalar_flat() const { return false; }
    double scalar_min(double tau) const { return n * (n - 1) / rho2(tau); }
    uint64_t direction_class_key(const Vec&) const { return 0; }

    int chart_count() const { return 2; }
    bool chart_contains(int chart, const Vec& x) const {
        return (chart == 0 || chart == 1) && x.norm() < detail::kChartDomainRadius;
    }
    int switch_target(int chart, const Vec& x) const {
        return x.norm() > detail::kChartSwitchRadius ? 1 - chart : -1;
    }
    bool is_symmetry_center(int, const Vec& x) const { return x.norm() < 1e-12; }

    template <class S>
    void transition(int from, int to, const S* in, S* out) const {
        if (from == to || from < 0 || from > 1 || to < 0 || to > 1)
            throw OutOfChart("sphere transition needs the two distinct stereographic charts");
        detail::stereographic_inversion(n, in, out);
    }
    template <class S>
    void transition_state(int from, int to, S* x, S* w) const {
        if (from == to || from < 0 || from > 1 || to < 0 || to > 1)
            throw OutOfChart("sphere transition needs the two distinct stereographic charts");
        detail::stereographic_inversion_state(n, x, w);
    }
    double transition_det_sign() const { return -1.0; }

    template <class S>
    void geom(int, const S* x, double tau, GeomJet<S>& jet) const {
        jet.clear(n);
        S r2(0.0);
        for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
        const S one_r2 = 1.0 + r2;
        const S psi2 = 4.0 / (one_r2 * one_r2);
        const double p2 = rho2(tau);
        const S conf = p2 * psi2;
        const S conf_inv = 1.0 / conf;
        for (int i = 0; i < n; ++i) {
            jet.g[i][i] = conf;
            jet.ginv[i][i] = conf_inv;
            jet.ric[i][i] = (n - 1) * psi2;
        }
        jet.sqrt_det = (n == 2) ? conf : conf * sqrt(conf);
        S dphi[3];
        for (int i = 0; i < n; ++i) dphi[i] = -2.0 * x[i] / one_r2;
        detail::conformal_gamma(n, dphi, jet);
        jet.scalar = S(n * (n - 1) / p2);
        // grad_scalar stays zero: R is spatially constant on the round sphere
    }
};

// ---------------------------------------------------------------------------
// cylinder(r0): S^2 x R with sphere factor (r0^2 + 2 tau) * g_{S^2(1)}.
struct CylinderModel {
    double r0 = 1.0;

    double rho2(double tau) const { return r0 * r0 + 2.0 * tau; }

    int dim() const { return 3; }
    double time_horizon() const { return INFINITY; }
    std::string name() const { return "cylinder:" + detail::fmt_param(r0); }
    CurvatureClass curvature_class() const { return CurvatureClass::nonneg_curvature_operator; }
    bool scalar_flat() const { return false; }
    double scalar_min(double tau) const { return 2.0 / rho2(tau); }
    uint64_t direction_class_key(const Vec& u) const {
        // rotations about the line factor and the z-reflection
        const double r12 = std::sqrt(u[0] * u[0] + u[1] * u[1]);
        return (static_cast<uint64_t>(std::llround(r12 * 1e9)) << 32) ^
               static_cast<uint64_t>(std::llround(std::fabs(u[2]) * 1e9));
    }

    int chart_count() const { return 2; }
    bool chart_contains(int chart, const Vec& x) const {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
        return (chart == 0 || chart == 1) && r < detail::kChartDomainRadius;
    }
    int switch_target(int chart, const Vec& x) const {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
        return r > detail::kChartSwitchRadius ? 1 - chart : -1;
    }
    bool is_symmetry_center(int, const Vec& x) const {
        return std::sqrt(x[0] * x[0] + x[1] * x[1]) < 1e-12;
    }

    template <class S>
    void transition(int from, int to, const S* in, S* out) const {
        if (from == to || from < 0 || from > 1 || to < 0 || to > 1)
            throw OutOfChart("cylinder transition needs the two distinct charts");
        detail::stereographic_inversion(2, in, out);
        out[2] = in[2];
    }
    template <class S>
    void transition_state(int from, int to, S* x, S* w) const {
        if (from == to || from < 0 || from > 1 || to < 0 || to > 1)
            throw OutOfChart("cylinder transition needs the two distinct charts");
        detail::stereographic_inversion_state(2, x, w);
    }
    double transition_det_sign() const { return -1.0; }

    template <class S>
    void geom(int, const S* x, double tau, GeomJet<S>& jet) const {
        jet.clear(3);
        S r2 = x[0] * x[0] + x[1] * x[1];
        const S one_r2 = 1.0 + r2;
        const S psi2 = 4.0 / (one_r2 * one_r2);
        const double p2 = rho2(tau);
        const S conf = p2 * psi2;
        const S conf_inv = 1.0 / conf;
        jet.g[0][0] = conf;
        jet.g[1][1] = conf;
        jet.g[2][2] = S(1.0);
        jet.ginv[0][0] = conf_inv;
        jet.ginv[1][1] = conf_inv;
        jet.ginv[2][2] = S(1.0);
        jet.sqrt_det = conf;
        jet.ric[0][0] = psi2;
        jet.ric[1][1] = psi2;
        S dphi[3];
        dphi[0] = -2.0 * x[0] / one_r2;
        dphi[1] = -2.0 * x[1] / one_r2;
        dphi[2] = S(0.0);
        detail::conformal_gamma(2, dphi, jet);
        jet.scalar = S(2.0 / p2);
    }
};

// ---------------------------------------------------------------------------
// cigar(a0): R^2 with g(tau) = (dx^2 + dy^2)/(a0 e^{-4 tau} + x^2 + y^2).
// The one built-in model with grad R != 0, exercising the full force term of
// the geodesic equation.
struct CigarModel {
    double a0 = 1.0;

    double a_of(double tau) const { return a0 * std::exp(-4.0 * tau); }

    int dim() const { return 2; }
    double time_horizon() const { return INFINITY; }
    std::string name() const { return "cigar:" + detail::fmt_param(a0); }
    CurvatureClass curvature_class() const { return CurvatureClass::nonneg_curvature_operator; }
    bool scalar_flat() const { return false; }
    double scalar_min(double) const { return 0.0; }
    uint64_t direction_class_key(const Vec&) const { return 0; }

    int chart_count() const { return 1; }
    bool chart_contains(int chart, const Vec&) const { return chart == 0; }
    int switch_target(int, const Vec&) const { return -1; }
    bool is_symmetry_center(int, const Vec& x) const { return x.norm() < 1e-12; }

    template <class S>
    void transition(int, int, const S*, S*) const {
        throw OutOfChart("cigar model has a single chart");
    }
    template <class S>
    void transition_state(int, int, S*, S*) const {
        throw OutOfChart("cigar model has a single chart");
    }
    double transition_det_sign() const { return 1.0; }

    template <class S>
    void geom(int, const S* x, double tau, GeomJet<S>& jet) const {
        jet.clear(2);
        const double a = a_of(tau);
        S r2 = x[0] * x[0] + x[1] * x[1];
        const S denom = a + r2;
        const S c = 1.0 / denom;
        jet.g[0][0] = c;
        jet.g[1][1] = c;
        jet.ginv[0][0] = denom;
        jet.ginv[1][1] = denom;
        jet.sqrt_det = c;
        jet.scalar = 4.0 * a * c;
        const S c2 = c * c;
        jet.ric[0][0] = 2.0 * a * c2;
        jet.ric[1][1] = 2.0 * a * c2;
        S dphi[3];
        dphi[0] = -x[0] * c;
        dphi[1] = -x[1] * c;
        dphi[2] = S(0.0);
        detail::conformal_gamma(2, dphi, jet);
        jet.grad_scalar[0] = -8.0 * a * x[0] * c;
        jet.grad_scalar[1] = -8.0 * a * x[1] * c;
    }
};

// ---------------------------------------------------------------------------
// Parabolic rescaling g_a(tau) = a^{-1} g(a tau).  Christoffels and the
// lowered Ricci tensor are scale invariant; R picks up a factor a and its
// raised gradient a^2.
template <class Base>
struct Rescaled {
    Base base;
    double scale = 1.0;

    int dim() const { return base.dim(); }
    double time_horizon() const { return base.time_horizon() / scale; }
    std::string name() const {
        return "rescale(" + base.name() + "," + detail::fmt_param(scale) + ")";
    }
    CurvatureClass curvature_class() const { return base.curvature_class(); }
    bool scalar_flat() const { return base.scalar_flat(); }
    double scalar_min(double tau) const { return scale * base.scalar_min(scale * tau); }
    uint64_t direction_class_key(const Vec& u) const { return base.direction_class_key(u); }

    int chart_count() const { return base.chart_count(); }
    bool chart_contains(int chart, const Vec& x) const { return base.chart_contains(chart, x); }
    int switch_target(int chart, const Vec& x) const { return base.switch_target(chart, x); }
    bool is_symmetry_center(int chart, const Vec& x) const {
        return base.is_symmetry_center(chart, x);
    }

    template <class S>
    void transition(int from, int to, const S* in, S* out) const {
        base.transition(from, to, in, out);
    }
    template <class S>
    void transition_state(int from, int to, S* x, S* w) const {
        base.transition_state(from, to, x, w);
    }
    double transition_det_sign() const { return base.transition_det_sign(); }

    template <class S>
    void geom(int chart, const S* x, double tau, GeomJet<S>& jet) const {
        base.geom(chart, x, scale * tau, jet);
        const double inv = 1.0 / scale;
        const double n = jet.n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                jet.g[i][j] = jet.g[i][j] * inv;
                jet.ginv[i][j] = jet.ginv[i][j] * scale;
            }
        jet.sqrt_det = jet.sqrt_det * std::pow(inv, n / 2.0);
        jet.scalar = jet.scalar * scale;
        for (int i = 0; i < n; ++i) jet.grad_scalar[i] = jet.grad_scalar[i] * (scale * scale);
    }
};

// ---------------------------------------------------------------------------

class FlowModel {
  public:
    using Variant = std::variant<FlatModel, SphereModel, CylinderModel, CigarModel,
                                 Rescaled<FlatModel>, Rescaled<SphereModel>,
                                 Rescaled<CylinderModel>, Rescaled<CigarModel>>;

    FlowModel() : v_(FlatModel{}) {}
    explicit FlowModel(Variant v) : v_(std::move(v)) {}

    template <class F>
    auto visit(F&& f) const {
        return std::visit(std::forward<F>(f), v_);
    }

    int dim() const {
        return visit([](const auto& m) { return m.dim(); });
    }
    double time_horizon() const {
        return visit([](const auto& m) { return m.time_horizon(); });
    }
    std::string name() const {
        return visit([](const auto& m) { return m.name(); });
    }
    CurvatureClass curvature_class() const {
        return visit([](const auto& m) { return m.curvature_class(); });
    }
    bool scalar_flat() const {
        return visit([](const auto& m) { return m.scalar_flat(); });
    }
    double scalar_min(double tau) const {
        return visit([&](const auto& m) { return m.scalar_min(tau); });
    }
    uint64_t direction_class_key(const Vec& u) const {
        return visit([&](const auto& m) { return m.direction_class_key(u); });
    }
    // largest c(tau) with g(tau) >= c(tau) g(0) as quadratic forms
    double metric_growth_lower(double tau) const {
        return visit([&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, SphereModel>) {
                return m.rho2(tau) / m.rho2(0.0);
            } else if constexpr (std::is_same_v<M, Rescaled<SphereModel>>) {
                return m.base.rho2(m.scale * tau) / m.base.rho2(0.0);
            } else {
                return 1.0;  // flat/cigar/cylinder: some direction never grows
            }
        });
    }
    int chart_count() const {
        return visit([](const auto& m) { return m.chart_count(); });
    }
    bool chart_contains(int chart, const Vec& x) const {
        return visit([&](const auto& m) { return m.chart_contains(chart, x); });
    }
    bool is_symmetry_center(const ChartPoint& p) const {
        return visit([&](const auto& m) { return m.is_symmetry_center(p.chart, p.x); });
    }
    Vec transition_point(int from, int to, const Vec& x) const {
        return visit([&](const auto& m) {
            Vec out(x.n);
            m.transition(from, to, x.a.data(), out.a.data());
            return out;
        });
    }

    const Variant& raw() const { return v_; }

  private:
    Variant v_;
};

inline FlowModel make_flat(int n) {
    if (n < 2 || n > kMaxDim)
        throw ConfigError("flat model dimension must be 2 or 3 in this build");
    return FlowModel(FlatModel{n});
}
inline FlowModel make_sphere(int n, double r0 = 1.0) {
    if (n < 2 || n > kMaxDim) throw ConfigError("sphere dimension must be 2 or 3 in this build");
    if (!(r0 > 0)) throw ConfigError("sphere radius must be positive");
    return FlowModel(SphereModel{n, r0});
}
inline FlowModel make_cylinder(double r0 = 1.0) {
    if (!(r0 > 0)) throw ConfigError("cylinder radius must be positive");
    return FlowModel(CylinderModel{r0});
}
inline FlowModel make_cigar(double a0 = 1.0) {
    if (!(a0 > 0)) throw ConfigError("cigar scale must be positive");
    return FlowModel(CigarModel{a0});
}

// Lemma 2.2's rescaling as a first-class model; rescale of a rescaled model
// composes the scales.
inline FlowModel rescale(const FlowModel& m, double a) {
    if (!(a > 0)) throw NonpositiveScale("rescale factor must be positive, got " +
                                         std::to_string(a));
    return m.visit([&](const auto& base) {
        using B = std::decay_t<decltype(base)>;
        if constexpr (std::is_same_v<B, Rescaled<FlatModel>> ||
                      std::is_same_v<B, Rescaled<SphereModel>> ||
                      std::is_same_v<B, Rescaled<CylinderModel>> ||
                      std::is_same_v<B, Rescaled<CigarModel>>) {
            auto r = base;
            r.scale *= a;
            return FlowModel(r);
        } else {
            return FlowModel(Rescaled<B>{base, a});
        }
    });
}

// Colon-separated model strings: flat:n, sphere:n:r0, cylinder:r0, cigar:a0.
inline FlowModel parse_model(const std::string& spec) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t pos = spec.find(':', start);
        parts.push_back(spec.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    auto num = [&](size_t i, double fallback, bool required = false) {
        if (i >= parts.size() || parts[i].empty()) {
            if (required) throw ConfigError("model spec '" + spec + "' is missing a parameter");
            return fallback;
        }
        char* end = nullptr;
        const double v = std::strtod(parts[i].c_str(), &end);
        if (end == parts[i].c_str() || *end != '\0')
            throw ConfigError("bad numeric parameter in model spec '" + spec + "'");
        return v;
    };
    const std::string& family = parts[0];
    if (family == "flat") return make_flat(static_cast<int>(num(1, 0, true)));
    if (family == "sphere") return make_sphere(static_cast<int>(num(1, 0, true)), num(2, 1.0));
    if (family == "cylinder") return make_cylinder(num(1, 1.0));
    if (family == "cigar") return make_cigar(num(1, 1.0));
    throw ConfigError("unknown model family '" + family + "'");
}

// ---------------------------------------------------------------------------
// point/time validation + tensor-valued accessors

inline void require_time(const FlowModel& m, double tau) {
    if (!(tau >= 0.0) || tau >= m.time_horizon())
        throw TimeOutOfRange("tau=" + std::to_string(tau) + " outside [0, T) of " + m.name());
}
inline void require_point(const FlowModel& m, const ChartPoint& q) {
    if (q.x.n != m.dim()) throw OutOfChart("point dimension mismatch for " + m.name());
    if (!m.chart_contains(q.chart, q.x))
        throw OutOfChart("point outside chart " + std::to_string(q.chart) + " domain of " +
                         m.name());
}

struct MetricData {
    Mat g;
    Mat g_inv;
    double sqrt_det = 0.0;
};

struct Christoffels {
    std::array<double, 27> a{};
    int n = 0;
    double at(int k, int i, int j) const { return a[static_cast<size_t>((k * 3 + i) * 3 + j)]; }
    double& at(int k, int i, int j) { return a[static_cast<size_t>((k * 3 + i) * 3 + j)]; }
};

struct CurvaturePack {
    Mat ric;
    double scalar = 0.0;
    Vec grad_scalar;  // raised index
    Christoffels christoffel;
};

inline GeomJet<double> geom_jet(const FlowModel& m, const ChartPoint& q, double tau) {
    GeomJet<double> jet;
    m.visit([&](const auto& mm) { mm.geom(q.chart, q.x.a.data(), tau, jet); });
    return jet;
}

inline MetricData metric_at(const FlowModel& m, const ChartPoint& q, double tau) {
    require_time(m, tau);
    require_point(m, q);
    const auto jet = geom_jet(m, q, tau);
    MetricData out;
    out.g = Mat(jet.n);
    out.g_inv = Mat(jet.n);
    for (int i = 0; i < jet.n; ++i)
        for (int j = 0; j < jet.n; ++j) {
            out.g.at(i, j) = jet.g[i][j];
            out.g_inv.at(i, j) = jet.ginv[i][j];
        }
    out.sqrt_det = jet.sqrt_det;
    return out;
}

inline CurvaturePack curvature_at(const FlowModel& m, const ChartPoint& q, double tau) {
    require_time(m, tau);
    require_point(m, q);
    const auto jet = geom_jet(m, q, tau);
    CurvaturePack out;
    out.ric = Mat(jet.n);
    out.grad_scalar = Vec(jet.n);
    out.christoffel.n = jet.n;
    for (int i = 0; i < jet.n; ++i) {
        out.grad_scalar[i] = jet.grad_scalar[i];
        for (int j = 0; j < jet.n; ++j) {
            out.ric.at(i, j) = jet.ric[i][j];
            for (int k = 0; k < jet.n; ++k) out.christoffel.at(k, i, j) = jet.gamma[k][i][j];
        }
    }
    out.scalar = jet.scalar;
    return out;
}

// ||(g(tau+h) - g(tau-h))/2h - 2 Ric(q,tau)|| in the g(tau) operator norm.
inline double flow_residual(const FlowModel& m, const ChartPoint& q, double tau, double h) {
    require_time(m, tau - h);
    require_time(m, tau + h);
    require_point(m, q);
    const MetricData gp = metric_at(m, q, tau + h);
    const MetricData gm = metric_at(m, q, tau - h);
    const MetricData g0 = metric_at(m, q, tau);
    const CurvaturePack cv = curvature_at(m, q, tau);
    Mat resid = (gp.g - gm.g) * (0.5 / h) - 2.0 * cv.ric;
    return metric_operator_norm(resid, g0.g);
}

}  // namespace rgl
