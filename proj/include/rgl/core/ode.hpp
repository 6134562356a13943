#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "rgl/core/dual.hpp"
#include "rgl/errors.hpp"

// Adaptive Dormand-Prince 5(4) over a small fixed-capacity state of generic
// scalars (double or Dual).  Step acceptance is controlled by the max norm of
// the embedded error estimate against atol + rtol*|y|.

namespace rgl {

inline constexpr int kMaxState = 7;  // x (<=3) + velocity (<=3) + energy

struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    uint64_t max_steps = 1000000;
    double initial_step = 0.0;  // 0 -> span/64
};

// Dormand-Prince coefficients (RK5(4)7M).
namespace dopri {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                        e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
}  // namespace dopri

// rhs(t, y, dy); after each accepted step step_cb(t, y) may mutate y (chart
// switches) and returns false to abort the integration early.
template <class S, class Rhs, class StepCb>
void integrate_dopri(Rhs&& rhs, S* y, int m, double t0, double t1, const OdeOptions& opt,
                     StepCb&& step_cb) {
    if (t1 <= t0) return;
    std::array<S, kMaxState> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    double t = t0;
    double h = opt.initial_step > 0 ? opt.initial_step : (t1 - t0) / 64.0;
    h = std::min(h, t1 - t0);
    uint64_t steps = 0;

    auto stage = [&](double ts, const S* ys, S* out) { rhs(ts, ys, out); };

    while (t < t1 - 1e-15 * (1.0 + std::fabs(t1))) {
        if (++steps > opt.max_steps) throw BlowUp("step budget exhausted");
        h = std::min(h, t1 - t);

        stage(t, y, k1.data());
        for (int i = 0; i < m; ++i) ytmp[i] = y[i] + h * dopri::a21 * k1[i];
        stage(t + dopri::c2 * h, ytmp.data(), k2.data());
        for (int i = 0; i < m; ++i) ytmp[i] = y[i] + h * (dopri::a31 * k1[i] + dopri::a32 * k2[i]);
        stage(t + dopri::c3 * h, ytmp.data(), k3.data());
        for (int i = 0; i < m; ++i)
            ytmp[i] = y[i] + h * (dopri::a41 * k1[i] + dopri::a42 * k2[i] + dopri::a43 * k3[i]);
        stage(t + dopri::c4 * h, ytmp.data(), k4.data());
        for (int i = 0; i < m; ++i)
            ytmp[i] = y[i] + h * (dopri::a51 * k1[i] + dopri::a52 * k2[i] + dopri::a53 * k3[i] +
                                  dopri::a54 * k4[i]);
        stage(t + dopri::c5 * h, ytmp.data(), k5.data());
        for (int i = 0; i < m; ++i)
            ytmp[i] = y[i] + h * (dopri::a61 * k1[i] + dopri::a62 * k2[i] + dopri::a63 * k3[i] +
                                  dopri::a64 * k4[i] + dopri::a65 * k5[i]);
        stage(t + h, ytmp.data(), k6.data());
        for (int i = 0; i < m; ++i)
            ynew[i] = y[i] + h * (dopri::b1 * k1[i] + dopri::b3 * k3[i] + dopri::b4 * k4[i] +
                                  dopri::b5 * k5[i] + dopri::b6 * k6[i]);
        stage(t + h, ynew.data(), k7.data());

        double err = 0.0;
        for (int i = 0; i < m; ++i) {
            const S e = h * (dopri::e1 * k1[i] + dopri::e3 * k3[i] + dopri::e4 * k4[i] +
                             dopri::e5 * k5[i] + dopri::e6 * k6[i] + dopri::e7 * k7[i]);
            const double sc = opt.atol + opt.rtol * std::max(snorm(y[i]), snorm(ynew[i]));
            err = std::max(err, snorm(e) / sc);
        }

        if (err <= 1.0) {
            t += h;
            for (int i = 0; i < m; ++i) y[i] = ynew[i];
            double ymax = 0;
            for (int i = 0; i < m; ++i) ymax = std::max(ymax, snorm(y[i]));
            if (!std::isfinite(ymax) || ymax > 1e8) throw BlowUp("state diverged");
            if (!step_cb(t, y)) return;
        }

        const double fac =
            err > 0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
        h *= fac;
        if (h < 1e-14 * (1.0 + std::fabs(t))) throw BlowUp("step size underflow");
    }
}

}  // namespace rgl
