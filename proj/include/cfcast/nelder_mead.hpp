#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cfcast/errors.hpp"

namespace cfcast {

struct NelderMeadOptions {
    int max_iterations = 2000;
    double diameter_tol = 1e-6; // stop when the simplex fits in this ball
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimization (reflection / expansion /
/// contraction / shrink with the standard coefficients). Deterministic: the
/// initial simplex is x0 plus one per-coordinate step. The objective may
/// return +infinity to mark infeasible points.
inline NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                    std::span<const double> x0, std::span<const double> steps,
                                    const NelderMeadOptions& opts = {}) {
    const size_t n = x0.size();
    if (steps.size() != n) throw ConfigError("nelder_mead: steps size mismatch");
    if (n == 0) {
        return {{}, f({}), 0, true};
    }

    std::vector<std::vector<double>> simplex;
    simplex.reserve(n + 1);
    simplex.emplace_back(x0.begin(), x0.end());
    for (size_t i = 0; i < n; ++i) {
        auto v = simplex[0];
        v[i] += steps[i] != 0.0 ? steps[i] : 1e-4;
        simplex.push_back(std::move(v));
    }
    std::vector<double> fv(n + 1);
    for (size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

    std::vector<size_t> order(n + 1);
    const auto sort_order = [&] {
        for (size_t i = 0; i <= n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    };
    const auto diameter = [&] {
        double dmax = 0.0;
        for (size_t a = 0; a <= n; ++a) {
            for (size_t b = a + 1; b <= n; ++b) {
                double d2 = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    const double di = simplex[a][i] - simplex[b][i];
                    d2 += di * di;
                }
                dmax = std::max(dmax, d2);
            }
        }
        return std::sqrt(dmax);
    };

    NelderMeadResult res;
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        sort_order();
        if (diameter() < opts.diameter_tol) {
            res.converged = true;
            break;
        }
        const size_t best = order[0];
        const size_t worst = order[n];
        const size_t second_worst = order[n - 1];

        std::vector<double> centroid(n, 0.0);
        for (size_t k = 0; k <= n; ++k) {
            if (k == worst) continue;
            for (size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        const auto point_at = [&](double coef) {
            std::vector<double> p(n);
            for (size_t i = 0; i < n; ++i) {
                p[i] = centroid[i] + coef * (simplex[worst][i] - centroid[i]);
            }
            return p;
        };

        auto reflected = point_at(-1.0);
        const double fr = f(reflected);
        if (fr < fv[best]) {
            auto expanded = point_at(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                fv[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second_worst]) {
            simplex[worst] = std::move(reflected);
            fv[worst] = fr;
            continue;
        }
        // Contract toward the better of the reflected/worst points.
        const bool outside = fr < fv[worst];
        auto contracted = point_at(outside ? -0.5 : 0.5);
        const double fc = f(contracted);
        if (fc < std::min(fr, fv[worst])) {
            simplex[worst] = std::move(contracted);
            fv[worst] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for (size_t k = 0; k <= n; ++k) {
            if (k == best) continue;
            for (size_t i = 0; i < n; ++i) {
                simplex[k][i] = simplex[best][i] + 0.5 * (simplex[k][i] - simplex[best][i]);
            }
            fv[k] = f(simplex[k]);
        }
    }

    sort_order();
    res.x = simplex[order[0]];
    res.value = fv[order[0]];
    res.iterations = iter;
    if (!res.converged) res.converged = diameter() < opts.diameter_tol;
    return res;
}

} // namespace cfcast
