#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace eemdx {

using Objective = std::function<double(std::span<const double>)>;

struct OptimizeResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    std::size_t max_iterations = 500;
    double relative_tolerance = 1e-10;
    double initial_step = 0.5;
};

/// Derivative-free simplex minimisation. Converged when the spread of objective
/// values across the simplex falls below relative_tolerance * |best|.
inline OptimizeResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& opt = {}) {
    const std::size_t n = start.size();
    if (n == 0) return {start, f(start), 0, true};

    std::vector<std::vector<double>> simplex(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opt.initial_step;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

    std::vector<std::size_t> idx(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    const auto point = [&](double coef, const std::vector<double>& worst, std::vector<double>& out) {
        for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + coef * (worst[k] - centroid[k]);
    };

    OptimizeResult res;
    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = idx.front(), worst = idx.back(), second = idx[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= opt.relative_tolerance * (std::abs(fv[best]) + 1e-300)) {
            res.converged = true;
            break;
        }
        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
        }
        point(-1.0, simplex[worst], trial);
        const double fr = f(trial);
        if (fr < fv[best]) {
            point(-2.0, simplex[worst], trial2);
            const double fe = f(trial2);
            if (fe < fr) {
                simplex[worst] = trial2;
                fv[worst] = fe;
            } else {
                simplex[worst] = trial;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            simplex[worst] = trial;
            fv[worst] = fr;
            continue;
        }
        // Contraction, outside or inside depending on whether the reflection helped.
        const bool outside = fr < fv[worst];
        point(outside ? -0.5 : 0.5, simplex[worst], trial2);
        const double fc = f(trial2);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = trial2;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            fv[i] = f(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.value = fv[best];
    return res;
}

struct BfgsOptions {
    std::size_t max_iterations = 200;
    double relative_tolerance = 1e-10;
    double gradient_step = 1e-6;
};

/// Quasi-Newton polish with central-difference gradients and a backtracking line search.
/// A step that cannot decrease the objective is treated as convergence.
inline OptimizeResult bfgs(const Objective& f, std::vector<double> x, const BfgsOptions& opt = {}) {
    const std::size_t n = x.size();
    OptimizeResult res;
    double fx = f(x);
    if (n == 0) return {x, fx, 0, true};

    const auto gradient = [&](const std::vector<double>& at) {
        std::vector<double> g(n);
        std::vector<double> probe = at;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = opt.gradient_step * std::max(1.0, std::abs(at[i]));
            probe[i] = at[i] + h;
            const double fp = f(probe);
            probe[i] = at[i] - h;
            const double fm = f(probe);
            probe[i] = at[i];
            g[i] = (fp - fm) / (2 * h);
        }
        return g;
    };

    // Inverse Hessian approximation, row-major.
    std::vector<double> H(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
    std::vector<double> g = gradient(x);
    std::vector<double> dir(n), xn(n), s(n), y(n), Hy(n);

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        for (std::size_t i = 0; i < n; ++i) {
            dir[i] = 0;
            for (std::size_t j = 0; j < n; ++j) dir[i] -= H[i * n + j] * g[j];
        }
        double slope = std::inner_product(g.begin(), g.end(), dir.begin(), 0.0);
        if (!(slope < 0)) {
            // Not a descent direction: restart from steepest descent.
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                H[i * n + i] = 1.0;
                dir[i] = -g[i];
            }
            slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
            if (slope == 0.0) {
                res.converged = true;
                break;
            }
        }
        double step = 1.0;
        double fn = fx;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * dir[i];
            fn = f(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved || fn >= fx) {
            res.converged = true;
            break;
        }
        const double change = (fx - fn) / (std::abs(fx) + 1e-300);
        const auto gn = gradient(xn);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        x = xn;
        fx = fn;
        g = gn;
        if (change < opt.relative_tolerance) {
            res.converged = true;
            break;
        }
        const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
        if (sy > 1e-300) {
            for (std::size_t i = 0; i < n; ++i) {
                Hy[i] = 0;
                for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i * n + j] * y[j];
            }
            const double yHy = std::inner_product(y.begin(), y.end(), Hy.begin(), 0.0);
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    H[i * n + j] += rho * ((1 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
                }
            }
        }
    }
    res.x = x;
    res.value = fx;
    return res;
}

}  // namespace eemdx
