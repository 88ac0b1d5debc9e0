#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eemdx/error.hpp"
#include "eemdx/rng.hpp"
#include "eemdx/spline.hpp"
#include "eemdx/timeseries.hpp"

namespace eemdx {

struct EemdConfig {
    std::size_t num_ensembles = 125;
    double noise_ratio = 0.01;
    std::size_t num_imfs = 5;
    std::size_t sift_iterations = 1;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (num_ensembles < 1) throw InvalidArgument("EEMD needs at least one ensemble member");
        if (num_imfs < 1) throw InvalidArgument("EEMD needs at least one IMF");
        if (!(noise_ratio > 0.0)) throw InvalidArgument("EEMD noise ratio must be positive");
        if (sift_iterations < 1) throw InvalidArgument("EEMD needs at least one sifting iteration");
    }
};

/// s IMFs (highest frequency first) plus the residual, all the length of the source.
struct Decomposition {
    std::vector<TimeSeries> imfs;
    TimeSeries residual;
    std::string source_name;

    std::size_t num_imfs() const noexcept { return imfs.size(); }

    /// Level j in 1..s+1; level s+1 is the residual.
    const TimeSeries& level(std::size_t j) const {
        if (j < 1 || j > imfs.size() + 1) {
            throw RangeError("decomposition level " + std::to_string(j) + " outside 1.." +
                             std::to_string(imfs.size() + 1));
        }
        return j <= imfs.size() ? imfs[j - 1] : residual;
    }

    /// Pointwise sum of every IMF and the residual.
    std::vector<double> reconstruct() const {
        std::vector<double> sum = residual.vector();
        for (const auto& imf : imfs) {
            for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += imf[t];
        }
        return sum;
    }

    bool operator==(const Decomposition&) const = default;
};

struct Extremum {
    std::ptrdiff_t index;
    double value;
    bool operator==(const Extremum&) const = default;
};

struct Extrema {
    std::vector<Extremum> maxima;
    std::vector<Extremum> minima;
};

struct Envelope {
    TimeSeries upper;
    TimeSeries lower;
    TimeSeries mean;
};

namespace detail {

inline Extrema find_extrema(std::span<const double> x) {
    if (x.size() < 3) {
        throw TooShortError("extrema search needs at least 3 samples, got " + std::to_string(x.size()));
    }
    Extrema out;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        // Extend over a plateau of equal values starting at i.
        std::size_t j = i;
        while (j + 1 < n && x[j + 1] == x[i]) ++j;
        if (j + 1 >= n) break;  // plateau reaches the end: not an interior extremum
        const double left = x[i - 1];
        const double right = x[j + 1];
        const auto mid = static_cast<std::ptrdiff_t>((i + j) / 2);
        if (x[i] > left && x[i] > right) {
            out.maxima.push_back({mid, x[i]});
        } else if (x[i] < left && x[i] < right) {
            out.minima.push_back({mid, x[i]});
        }
        i = j + 1;
    }
    return out;
}

inline std::vector<double> spline_envelope(std::span<const Extremum> extrema, std::size_t length) {
    if (extrema.size() < 2) {
        throw DegenerateEnvelopeError("envelope needs at least 2 extrema, got " + std::to_string(extrema.size()));
    }
    std::vector<Knot> knots;
    knots.reserve(extrema.size() + 2);
    const auto last_index = static_cast<std::ptrdiff_t>(length) - 1;
    // One mirrored extremum beyond each boundary tames the spline end effects.
    if (extrema.front().index > 0) {
        knots.push_back({-static_cast<double>(extrema.front().index), extrema.front().value});
    }
    for (const auto& e : extrema) {
        knots.push_back({static_cast<double>(e.index), e.value});
    }
    if (extrema.back().index < last_index) {
        knots.push_back({static_cast<double>(2 * last_index - extrema.back().index), extrema.back().value});
    }
    return NaturalCubicSpline(std::move(knots)).sample(length);
}

/// Mean of the upper and lower envelopes; empty when either has fewer than 2 extrema.
inline std::vector<double> envelope_mean(std::span<const double> z) {
    const Extrema ex = find_extrema(z);
    if (ex.maxima.size() < 2 || ex.minima.size() < 2) {
        return {};
    }
    auto upper = spline_envelope(ex.maxima, z.size());
    const auto lower = spline_envelope(ex.minima, z.size());
    for (std::size_t t = 0; t < upper.size(); ++t) upper[t] = 0.5 * (upper[t] + lower[t]);
    return upper;
}

/// Returns the IMF candidate; empty when z carries no oscillation to extract.
inline std::vector<double> sift(std::span<const double> z, std::size_t iterations) {
    std::vector<double> h(z.begin(), z.end());
    for (std::size_t it = 0; it < iterations; ++it) {
        const auto m = envelope_mean(h);
        if (m.empty()) {
            if (it == 0) return {};
            break;
        }
        for (std::size_t t = 0; t < h.size(); ++t) h[t] -= m[t];
    }
    return h;
}

/// s IMFs followed by the residual.
inline std::vector<std::vector<double>> emd(std::span<const double> x, std::size_t s, std::size_t sift_iterations) {
    if (x.size() < 3) {
        throw TooShortError("EMD needs at least 3 samples, got " + std::to_string(x.size()));
    }
    std::vector<std::vector<double>> levels(s + 1, std::vector<double>(x.size(), 0.0));
    std::vector<double> z(x.begin(), x.end());
    for (std::size_t j = 0; j < s; ++j) {
        auto d = sift(z, sift_iterations);
        if (d.empty()) break;  // remaining IMF slots stay zero
        for (std::size_t t = 0; t < z.size(); ++t) z[t] -= d[t];
        levels[j] = std::move(d);
    }
    levels[s] = std::move(z);
    return levels;
}

inline Decomposition to_decomposition(const TimeSeries& x, std::vector<std::vector<double>> levels) {
    const std::size_t s = levels.size() - 1;
    std::vector<TimeSeries> imfs;
    imfs.reserve(s);
    for (std::size_t j = 0; j < s; ++j) {
        imfs.emplace_back(x.start(), std::move(levels[j]), x.name() + ".imf_" + std::to_string(j + 1));
    }
    return Decomposition{std::move(imfs), TimeSeries(x.start(), std::move(levels[s]), x.name() + ".residual"),
                         x.name()};
}

}  // namespace detail

/// Strict local extrema; a flat plateau is reported once, at its midpoint.
inline Extrema find_extrema(const TimeSeries& x) { return detail::find_extrema(x.values()); }

/// Natural cubic spline through the extrema, mirrored once at each end, sampled at 0..length-1.
inline TimeSeries spline_envelope(std::span<const Extremum> extrema, std::size_t length) {
    return TimeSeries(Date{}, detail::spline_envelope(extrema, length), "envelope");
}

/// Upper, lower and mean envelopes of x; throws DegenerateEnvelopeError without 2 maxima and 2 minima.
inline Envelope envelope(const TimeSeries& x) {
    const Extrema ex = find_extrema(x);
    auto upper = detail::spline_envelope(ex.maxima, x.size());
    auto lower = detail::spline_envelope(ex.minima, x.size());
    std::vector<double> m(x.size());
    for (std::size_t t = 0; t < m.size(); ++t) m[t] = 0.5 * (upper[t] + lower[t]);
    return Envelope{TimeSeries(x.start(), std::move(upper), x.name() + ".upper"),
                    TimeSeries(x.start(), std::move(lower), x.name() + ".lower"),
                    TimeSeries(x.start(), std::move(m), x.name() + ".mean")};
}

struct SiftResult {
    TimeSeries imf;
    TimeSeries remainder;
};

/// Extracts one IMF by `iterations` rounds of envelope-mean removal. A signal
/// without enough extrema yields a zero IMF and leaves the remainder untouched.
inline SiftResult sift(const TimeSeries& z, std::size_t iterations) {
    if (z.size() < 3) {
        throw TooShortError("sifting needs at least 3 samples, got " + std::to_string(z.size()));
    }
    auto d = detail::sift(z.values(), iterations);
    if (d.empty()) {
        return {z.with_values(std::vector<double>(z.size(), 0.0)), z};
    }
    std::vector<double> rest(z.size());
    for (std::size_t t = 0; t < rest.size(); ++t) rest[t] = z[t] - d[t];
    return {z.with_values(std::move(d)), z.with_values(std::move(rest))};
}

/// Plain EMD into exactly s IMFs plus residual; sum of all components reproduces x.
inline Decomposition emd(const TimeSeries& x, std::size_t s, std::size_t sift_iterations = 1) {
    if (s < 1) throw InvalidArgument("EMD needs at least one IMF");
    return detail::to_decomposition(x, detail::emd(x.values(), s, sift_iterations));
}

/// Ensemble EMD: mean of the EMDs of m noisy copies of x, noise std = noise_ratio * population std of x.
inline Decomposition eemd(const TimeSeries& x, const EemdConfig& cfg) {
    cfg.validate();
    if (x.size() < 3) {
        throw TooShortError("EEMD needs at least 3 samples, got " + std::to_string(x.size()));
    }
    const std::size_t n = x.size();
    const std::size_t s = cfg.num_imfs;
    const double sigma_noise = cfg.noise_ratio * population_stddev(x.values());

    std::vector<std::vector<double>> acc(s + 1, std::vector<double>(n, 0.0));
    std::vector<double> noisy(n);
    // Members are accumulated in ensemble-index order so the result is reproducible bit for bit.
    for (std::size_t k = 0; k < cfg.num_ensembles; ++k) {
        CounterRng rng(derive_seed(cfg.rng_seed, k));
        for (std::size_t t = 0; t < n; ++t) noisy[t] = x[t] + sigma_noise * rng.next_normal();
        const auto levels = detail::emd(noisy, s, cfg.sift_iterations);
        for (std::size_t j = 0; j <= s; ++j) {
            for (std::size_t t = 0; t < n; ++t) acc[j][t] += levels[j][t];
        }
    }
    const double inv = 1.0 / static_cast<double>(cfg.num_ensembles);
    for (auto& level : acc) {
        for (double& v : level) v *= inv;
    }
    return detail::to_decomposition(x, std::move(acc));
}

}  // namespace eemdx
