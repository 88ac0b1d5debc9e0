#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eemdx/error.hpp"
#include "eemdx/timeseries.hpp"

namespace eemdx {

/// Ranks starting at 1; tied values share the mean of the ranks they span.
inline std::vector<double> mid_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
inline double incomplete_beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::incomplete_beta_cf(a, b, x) / a;
    }
    return 1.0 - front * detail::incomplete_beta_cf(b, a, 1.0 - x) / b;
}

/// Upper-tail probability P(T > t) of Student's t with df degrees of freedom.
inline double student_t_sf(double t, double df) {
    if (!(df >= 1.0)) throw InvalidArgument("Student t needs df >= 1, got " + std::to_string(df));
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t >= 0 ? tail : 1.0 - tail;
}

struct SpearmanResult {
    double rho;
    double p_value;
};

/// Largest sample size for which the p-value comes from the exact permutation distribution.
inline constexpr std::size_t kExactPermutationMaxN = 10;

namespace detail {

inline double pearson_of(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Two-sided permutation p-value: share of all orderings of `ry` whose rank
/// correlation with `rx` is at least as extreme as the observed one.
inline double exact_permutation_p(std::span<const double> rx, std::vector<double> ry, double rho) {
    const double n = static_cast<double>(rx.size());
    const double mx = mean(rx), my = mean(ry);
    double sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    // rho_perm = (sum rx*ry - n mx my) / sqrt(sxx syy); compare cross products directly.
    const double scale = std::sqrt(sxx * syy);
    const double cut = std::abs(rho) * scale - 1e-9 * scale;
    std::sort(ry.begin(), ry.end());
    std::size_t extreme = 0, total = 0;
    do {
        double cross = 0;
        for (std::size_t i = 0; i < rx.size(); ++i) cross += rx[i] * ry[i];
        if (std::abs(cross - n * mx * my) >= cut) ++extreme;
        ++total;
    } while (std::next_permutation(ry.begin(), ry.end()));
    // next_permutation visits distinct arrangements only; each stands for the same
    // number of raw permutations, so the ratio is unaffected by ties.
    return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace detail

/// Spearman rank correlation (Pearson correlation of mid-ranks) with a two-sided p-value.
/// The p-value is exact for n <= kExactPermutationMaxN, otherwise from the t approximation.
inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("spearman inputs differ in length: " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    }
    if (x.size() < 3) throw TooShortError("spearman needs at least 3 pairs, got " + std::to_string(x.size()));
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    const auto all_equal = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (all_equal(rx) || all_equal(ry)) {
        throw UndefinedCorrelationError("spearman correlation undefined for a constant input");
    }
    double rho = std::clamp(detail::pearson_of(rx, ry), -1.0, 1.0);
    const std::size_t n = x.size();
    if (n <= kExactPermutationMaxN) {
        return {rho, detail::exact_permutation_p(rx, ry, rho)};
    }
    const double df = static_cast<double>(n - 2);
    if (std::abs(rho) >= 1.0) return {rho, 0.0};
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    return {rho, std::clamp(2.0 * student_t_sf(std::abs(t), df), 0.0, 1.0)};
}

/// Rank-difference form 1 - 6 sum(D^2) / (n^3 - n); equals `spearman` when there are no ties.
inline double spearman_rank_difference(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("spearman inputs differ in length");
    if (x.size() < 3) throw TooShortError("spearman needs at least 3 pairs");
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    double d2 = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double n = static_cast<double>(x.size());
    return 1.0 - 6.0 * d2 / (n * n * n - n);
}

struct Metrics {
    double me;
    double rmse;
    double mae;
};

/// Mean error, root-mean-square error and mean absolute error of predicted - observed.
inline Metrics metrics(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size() || predicted.empty()) {
        throw DimensionError("metrics need equal non-empty inputs, got " + std::to_string(predicted.size()) +
                             " and " + std::to_string(observed.size()));
    }
    double se = 0, sq = 0, sa = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - observed[i];
        se += e;
        sq += e * e;
        sa += std::abs(e);
    }
    const double n = static_cast<double>(predicted.size());
    return {se / n, std::sqrt(sq / n), sa / n};
}

struct ScreeningRule {
    double min_abs_rho = 0.3;
    double alpha = 0.01;
    bool strict = false;  // |rho| > min_abs_rho instead of >=

    bool accepts(double rho, double p) const {
        const double a = std::abs(rho);
        return (strict ? a > min_abs_rho : a >= min_abs_rho) && p <= alpha;
    }
};

struct CorrelationResult {
    std::string variable_name;
    double rho = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_samples = 0;
    bool selected = false;
    bool defined = true;  // false when the correlation could not be computed
};

/// One result per candidate, in input order. A candidate whose correlation is
/// undefined is reported unselected rather than aborting the batch.
inline std::vector<CorrelationResult> screen_variables(const TimeSeries& cases,
                                                       const std::vector<TimeSeries>& candidates,
                                                       const ScreeningRule& rule = {}) {
    std::vector<CorrelationResult> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.size() != cases.size() || c.start() != cases.start()) {
            throw AlignmentError("candidate '" + c.name() + "' is not aligned with '" + cases.name() + "'");
        }
        CorrelationResult r;
        r.variable_name = c.name();
        r.n_samples = c.size();
        try {
            const auto sp = spearman(c.values(), cases.values());
            r.rho = sp.rho;
            r.p_value = sp.p_value;
            r.selected = rule.accepts(sp.rho, sp.p_value);
        } catch (const UndefinedCorrelationError&) {
            r.defined = false;
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace eemdx
