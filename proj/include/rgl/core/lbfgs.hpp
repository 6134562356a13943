#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "rgl/errors.hpp"

// Limited-memory BFGS with Armijo backtracking, dense double vectors.
// Sized for the discrete path-energy minimizer (a few hundred unknowns).

namespace rgl {

struct LbfgsOptions {
    int max_iterations = 500;
    int history = 8;
    double grad_tol = 1e-10;
    double step_tol = 1e-15;
};

struct LbfgsResult {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// objective(x, grad_out) -> value; grad_out has x.size() entries.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& objective,
    std::vector<double>& x, const LbfgsOptions& opt = {}) {
    const size_t n = x.size();
    std::vector<double> g(n), gnew(n), xnew(n), dir(n);
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;

    double f = objective(x, g);
    LbfgsResult res;
    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        double gmax = 0;
        for (double gi : g) gmax = std::max(gmax, std::fabs(gi));
        if (gmax < opt.grad_tol * (1.0 + std::fabs(f))) {
            res.converged = true;
            break;
        }

        // two-loop recursion
        dir = g;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            double sd = 0;
            for (size_t k = 0; k < n; ++k) sd += s_hist[i][k] * dir[k];
            alpha[i] = rho_hist[i] * sd;
            for (size_t k = 0; k < n; ++k) dir[k] -= alpha[i] * y_hist[i][k];
        }
        if (!s_hist.empty()) {
            double yy = 0, sy = 0;
            const auto& s = s_hist.back();
            const auto& yv = y_hist.back();
            for (size_t k = 0; k < n; ++k) {
                yy += yv[k] * yv[k];
                sy += s[k] * yv[k];
            }
            const double scale = sy / std::max(yy, 1e-300);
            for (size_t k = 0; k < n; ++k) dir[k] *= scale;
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            double yd = 0;
            for (size_t k = 0; k < n; ++k) yd += y_hist[i][k] * dir[k];
            const double beta = rho_hist[i] * yd;
            for (size_t k = 0; k < n; ++k) dir[k] += s_hist[i][k] * (alpha[i] - beta);
        }
        for (size_t k = 0; k < n; ++k) dir[k] = -dir[k];

        double slope = 0;
        for (size_t k = 0; k < n; ++k) slope += g[k] * dir[k];
        if (slope >= 0) {  // fall back to steepest descent
            for (size_t k = 0; k < n; ++k) dir[k] = -g[k];
            slope = 0;
            for (size_t k = 0; k < n; ++k) slope += g[k] * dir[k];
        }

        double step = 1.0;
        double fnew = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (size_t k = 0; k < n; ++k) xnew[k] = x[k] + step * dir[k];
            fnew = objective(xnew, gnew);
            if (std::isfinite(fnew) && fnew <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
            if (step < opt.step_tol) break;
        }
        if (!accepted) throw LineSearchFailure("Armijo backtracking stalled");

        std::vector<double> s(n), yv(n);
        double sy = 0;
        for (size_t k = 0; k < n; ++k) {
            s[k] = xnew[k] - x[k];
            yv[k] = gnew[k] - g[k];
            sy += s[k] * yv[k];
        }
        if (sy > 1e-300) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        const double df = f - fnew;
        x = xnew;
        g = gnew;
        f = fnew;
        if (df < 1e-14 * (1.0 + std::fabs(f))) {
            res.converged = true;
            break;
        }
    }
    res.value = f;
    return res;
}

}  // namespace rgl
