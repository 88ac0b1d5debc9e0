#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "eemdx/error.hpp"
#include "eemdx/io.hpp"
#include "eemdx/panel.hpp"
#include "eemdx/spectral_graph.hpp"
#include "eemdx/timeseries.hpp"

namespace eemdx {

/// Upper bound on relative errors and daily variations.
inline constexpr double kMaxRelativeError = 10.0;

/// e_t = |1 - c_t / chat_t| capped at kMaxRelativeError. A zero prediction gives 0 when c_t is
/// also 0 and the cap otherwise.
inline std::vector<double> model_errors(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) {
        throw DimensionError("observed and predicted lengths differ: " + std::to_string(observed.size()) + " vs " +
                             std::to_string(predicted.size()));
    }
    std::vector<double> e(observed.size());
    for (std::size_t t = 0; t < e.size(); ++t) {
        if (predicted[t] == 0.0) {
            e[t] = observed[t] == 0.0 ? 0.0 : kMaxRelativeError;
        } else {
            e[t] = std::min(std::abs(1.0 - observed[t] / predicted[t]), kMaxRelativeError);
        }
    }
    return e;
}

inline std::vector<double> model_errors(const TimeSeries& observed, const TimeSeries& predicted) {
    return model_errors(observed.values(), predicted.values());
}

/// Mean plus 1.5 sample standard deviations.
inline double threshold(std::span<const double> values) {
    if (values.empty()) throw EmptyInputError("threshold of an empty sequence");
    return mean(values) + 1.5 * sample_stddev(values);
}

/// s_t = |1 - c_t / c_{t-1}| for t = 2..N (length N - 1), with the same zero guards as model_errors.
inline std::vector<double> daily_variation(std::span<const double> cases) {
    if (cases.size() < 2) throw TooShortError("daily variation needs at least 2 days, got " + std::to_string(cases.size()));
    std::vector<double> s(cases.size() - 1);
    for (std::size_t t = 1; t < cases.size(); ++t) {
        const double prev = cases[t - 1], cur = cases[t];
        if (prev == 0.0) {
            s[t - 1] = cur == 0.0 ? 0.0 : kMaxRelativeError;
        } else {
            s[t - 1] = std::min(std::abs(1.0 - cur / prev), kMaxRelativeError);
        }
    }
    return s;
}

inline std::vector<double> daily_variation(const TimeSeries& cases) { return daily_variation(cases.values()); }

/// 1-based days t (value index + first_day) whose value exceeds the threshold of `values`.
inline std::vector<std::size_t> days_above_threshold(std::span<const double> values, std::size_t first_day = 1) {
    const double td = threshold(values);
    std::vector<std::size_t> days;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] > td) days.push_back(i + first_day);
    }
    return days;
}

struct ErrorSeries {
    std::string city_id;
    std::vector<double> errors;  // errors[k] is day k + 1
    double threshold = 0.0;
    std::vector<std::size_t> significant_days;
    std::size_t negative_observations = 0;
};

inline ErrorSeries error_series(const std::string& city_id, std::span<const double> observed,
                                std::span<const double> predicted) {
    ErrorSeries out{city_id, model_errors(observed, predicted), 0.0, {}, 0};
    out.threshold = threshold(out.errors);
    out.significant_days = days_above_threshold(out.errors, 1);
    out.negative_observations = static_cast<std::size_t>(std::count_if(observed.begin(), observed.end(), [](double c) { return c < 0; }));
    return out;
}

struct MatchResult {
    double fraction = 0.0;
    std::size_t matched = 0;
    std::size_t eligible = 0;
};

/// A day t of CE with 1 < t < nc matches when t - 1, t or t + 1 is in CA.
/// The fraction is matched / eligible, or 0 when nothing is eligible.
inline MatchResult match_errors_anomalies(std::span<const std::size_t> ce, std::span<const std::size_t> ca,
                                          std::size_t nc) {
    const auto check = [&](std::size_t t) {
        if (t < 1 || t > nc) throw RangeError("day " + std::to_string(t) + " outside 1.." + std::to_string(nc));
    };
    for (std::size_t t : ce) check(t);
    for (std::size_t t : ca) check(t);
    const std::set<std::size_t> anomalous(ca.begin(), ca.end());
    const std::set<std::size_t> errors(ce.begin(), ce.end());
    MatchResult r;
    for (std::size_t t : errors) {
        if (t <= 1 || t >= nc) continue;
        ++r.eligible;
        if (anomalous.count(t - 1) || anomalous.count(t) || anomalous.count(t + 1)) ++r.matched;
    }
    r.fraction = r.eligible ? static_cast<double>(r.matched) / static_cast<double>(r.eligible) : 0.0;
    return r;
}

struct AnomalyReport {
    std::string city_id;
    std::vector<double> variation;    // s_t for days 2..nc
    std::vector<double> accentuated;  // r_t for days 2..nc
    double threshold = 0.0;
    std::vector<std::size_t> anomalous_days;  // 1-based days of the common range
    std::size_t negative_observations = 0;
};

namespace detail {

inline void check_graph_matches(const PanelDataset& panel, const CityGraph& g) {
    if (panel.cities.size() != g.size()) {
        throw AlignmentError("graph has " + std::to_string(g.size()) + " nodes, panel has " +
                             std::to_string(panel.cities.size()) + " cities");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (panel.cities[i].city_id != g.node_ids()[i]) {
            throw AlignmentError("graph node " + std::to_string(i + 1) + " is '" + g.node_ids()[i] + "', panel city is '" +
                                 panel.cities[i].city_id + "'");
        }
    }
}

}  // namespace detail

/// Spectral anomaly detection over the days shared by every city. Day 1 is the first common day;
/// the variation of day t compares it with day t - 1, so reports cover days 2..nc.
inline std::vector<AnomalyReport> detect_anomalies(const PanelDataset& panel, const CityGraph& g,
                                                   const SpectralFilter& filter = SpectralFilter::accentuate()) {
    detail::check_graph_matches(panel, g);
    if (filter.kind != SpectralFilter::Kind::accentuate) throw InvalidArgument("anomaly detection needs an accentuator");
    const auto [lo, hi] = panel.common_range();
    const std::size_t nc = static_cast<std::size_t>(hi - lo) + 1;
    if (nc < 2) throw TooShortError("anomaly detection needs at least 2 common days");
    const std::size_t n = panel.cities.size();

    std::vector<AnomalyReport> reports(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = panel.cities[i].cases.between(lo, hi);
        reports[i].city_id = panel.cities[i].city_id;
        reports[i].variation = daily_variation(c);
        reports[i].accentuated.resize(nc - 1);
        reports[i].negative_observations =
            static_cast<std::size_t>(std::count_if(c.values().begin(), c.values().end(), [](double v) { return v < 0; }));
    }
    GraphSignal s(n);
    for (std::size_t k = 0; k + 1 < nc; ++k) {
        for (std::size_t i = 0; i < n; ++i) s[i] = reports[i].variation[k];
        const auto r = apply_filter(g, s, filter);
        for (std::size_t i = 0; i < n; ++i) reports[i].accentuated[k] = r[i];
    }
    for (auto& rep : reports) {
        rep.threshold = threshold(rep.accentuated);
        rep.anomalous_days = days_above_threshold(rep.accentuated, 2);
    }
    return reports;
}

struct NormalizationResult {
    PanelDataset panel;
    std::size_t clamped = 0;  // filtered values below zero that were set to zero
    std::vector<Date> days;
    std::vector<double> high_band_before;  // energy of the coefficients the low-pass removes
    std::vector<double> high_band_after;
};

/// Low-pass filters each common day's cross-city case signal. Days outside the common
/// range (a city that started earlier) are left as they are.
inline NormalizationResult normalize_cases(const PanelDataset& panel, const CityGraph& g, double cutoff = 0.5) {
    detail::check_graph_matches(panel, g);
    const auto f = SpectralFilter::lowpass(cutoff);
    f.validate();
    const auto [lo, hi] = panel.common_range();
    const std::size_t n = panel.cities.size();
    std::vector<std::vector<double>> values;
    for (const auto& c : panel.cities) values.push_back(c.cases.vector());

    NormalizationResult out{panel, 0, {}, {}, {}};
    GraphSignal x(n);
    const auto high_energy = [&](const GraphSignal& sig) {
        const auto xh = gft(g, sig);
        double e = 0;
        for (std::size_t l = 0; l < n; ++l) {
            if (f.gain(l, g.eigenvalues()) == 0.0) e += xh[l] * xh[l];
        }
        return e;
    };
    for (Date d = lo; d <= hi; d = d + 1) {
        for (std::size_t i = 0; i < n; ++i) x[i] = values[i][static_cast<std::size_t>(d - panel.cities[i].cases.start())];
        auto y = apply_filter(g, x, f);
        out.days.push_back(d);
        out.high_band_before.push_back(high_energy(x));
        out.high_band_after.push_back(high_energy(y));
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i] < 0) {
                y[i] = 0;
                ++out.clamped;
            }
            values[i][static_cast<std::size_t>(d - panel.cities[i].cases.start())] = y[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.panel.cities[i].cases = out.panel.cities[i].cases.with_values(std::move(values[i]));
    }
    return out;
}

/// Per-day CSV city_id,day,e,r,in_CE,in_CA,matched for one city; `e` covers days 1..nc,
/// `r` days 2..nc (NA on day 1).
inline std::string anomaly_to_csv(const ErrorSeries& errors, const AnomalyReport& report, Date first_day) {
    const std::set<std::size_t> ce(errors.significant_days.begin(), errors.significant_days.end());
    const std::set<std::size_t> ca(report.anomalous_days.begin(), report.anomalous_days.end());
    const std::size_t nc = errors.errors.size();
    std::string out = "city_id,day,date,e,r,in_CE,in_CA,matched\n";
    for (std::size_t t = 1; t <= nc; ++t) {
        const bool in_ce = ce.count(t) > 0;
        const bool matched = in_ce && t > 1 && t < nc && (ca.count(t - 1) || ca.count(t) || ca.count(t + 1));
        out += errors.city_id + ',' + std::to_string(t) + ',' + (first_day + static_cast<std::int32_t>(t - 1)).iso() + ',' +
               format_number(errors.errors[t - 1]) + ',' +
               (t >= 2 && t - 2 < report.accentuated.size() ? format_number(report.accentuated[t - 2]) : "NA") + ',' +
               (in_ce ? "1" : "0") + ',' + (ca.count(t) ? "1" : "0") + ',' + (matched ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace eemdx
