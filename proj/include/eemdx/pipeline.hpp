#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eemdx/anomaly.hpp"
#include "eemdx/arimax.hpp"
#include "eemdx/hybrid.hpp"
#include "eemdx/ingest.hpp"
#include "eemdx/panel.hpp"
#include "eemdx/stats.hpp"

namespace eemdx {

enum class Method { arimax, eemd_arimax };

inline Method parse_method(const std::string& text) {
    if (text == "arimax") return Method::arimax;
    if (text == "eemd-arimax") return Method::eemd_arimax;
    throw InvalidArgument("unknown method '" + text + "' (expected arimax or eemd-arimax)");
}

inline std::string method_name(Method m) { return m == Method::arimax ? "arimax" : "eemd-arimax"; }

struct PredictionConfig {
    Method method = Method::eemd_arimax;
    EemdConfig eemd;
    ArimaxOrder arimax_bounds = kDefaultOrderBounds;
    std::size_t lag_days = 5;
    ScreeningRule screening;
};

struct CityPrediction {
    std::string city_id;
    TimeSeries observed;   // lagged case series
    TimeSeries predicted;  // in-sample one-step-ahead fit
    std::vector<ArimaxModel> models;  // one for ARIMAX, s + 1 for the hybrid
    std::vector<CorrelationResult> screening;
    std::vector<std::string> selected;
    Metrics metrics{};
    std::optional<HybridFit> hybrid;

    /// Orders joined by '|', e.g. "(1,0,1,2)|(0,1,1,2)".
    std::string orders() const {
        std::string out;
        for (const auto& m : models) out += (out.empty() ? "" : "|") + m.order.str();
        return out;
    }
};

/// Correlation screening of every exogenous variable against the lagged cases.
inline std::vector<CorrelationResult> screen_city(const CityRecord& city, std::size_t lag_days,
                                                  const ScreeningRule& rule = {}) {
    const auto lagged = apply_lag(city.cases, city.exogenous(), lag_days);
    return screen_variables(lagged.cases, lagged.exog, rule);
}

/// Screens, lags and fits one city with the chosen method.
inline CityPrediction predict_city(const CityRecord& city, const PredictionConfig& cfg) {
    const auto lagged = apply_lag(city.cases, city.exogenous(), cfg.lag_days);
    auto screening = screen_variables(lagged.cases, lagged.exog, cfg.screening);
    std::vector<TimeSeries> exog;
    std::vector<std::string> selected;
    for (std::size_t k = 0; k < lagged.exog.size(); ++k) {
        if (screening[k].selected) {
            exog.push_back(lagged.exog[k]);
            selected.push_back(lagged.exog[k].name());
        }
    }
    std::vector<ArimaxModel> models;
    std::optional<HybridFit> hybrid;
    std::optional<TimeSeries> predicted;
    if (cfg.method == Method::arimax) {
        models.push_back(select_order(lagged.cases, exog, {cfg.arimax_bounds.p, cfg.arimax_bounds.d, cfg.arimax_bounds.q, exog.size()}));
        predicted = fitted_values(models.back(), lagged.cases, exog);
    } else {
        HybridConfig hc;
        hc.eemd = cfg.eemd;
        hc.arimax_bounds = cfg.arimax_bounds;
        hybrid = fit_hybrid(lagged.cases, exog, hc);
        predicted = hybrid->prediction;
        models = hybrid->level_models;
    }
    CityPrediction out{city.city_id, lagged.cases, *predicted, std::move(models), std::move(screening),
                       std::move(selected), {}, std::move(hybrid)};
    out.metrics = metrics(out.predicted.values(), out.observed.values());
    return out;
}

/// The panel cut to [from, to] for every city.
inline PanelDataset restrict_panel(const PanelDataset& panel, Date from, Date to) {
    std::vector<CityRecord> cities;
    for (const auto& c : panel.cities) {
        CityRecord r = c;
        r.cases = c.cases.between(from, to);
        for (auto* group : {&r.meteorological, &r.mobility}) {
            for (auto& s : *group) s = s.between(from, to);
        }
        cities.push_back(std::move(r));
    }
    return PanelDataset(std::move(cities));
}

struct CityMatch {
    ErrorSeries errors;
    AnomalyReport anomalies;
    MatchResult match;
};

struct AnomalyAnalysis {
    Date first_day;
    std::size_t num_days = 0;
    std::vector<CityMatch> cities;  // panel order

    double mean_fraction() const {
        if (cities.empty()) return 0.0;
        double s = 0;
        for (const auto& c : cities) s += c.match.fraction;
        return s / static_cast<double>(cities.size());
    }
};

/// Relates prediction errors to spectral anomalies over the days every city has both a case
/// count and a prediction. `predictions[i]` belongs to panel city i.
inline AnomalyAnalysis analyze_anomalies(const PanelDataset& panel, const std::vector<TimeSeries>& predictions,
                                         const CityGraph& g, const SpectralFilter& filter = SpectralFilter::accentuate()) {
    if (predictions.size() != panel.cities.size()) {
        throw DimensionError("need one prediction series per city: " + std::to_string(predictions.size()) + " vs " +
                             std::to_string(panel.cities.size()));
    }
    auto [lo, hi] = panel.common_range();
    for (const auto& p : predictions) {
        lo = std::max(lo, p.start());
        hi = std::min(hi, p.end());
    }
    if (hi < lo) throw NoOverlapError("predictions and cases share no common dates");
    const auto window = restrict_panel(panel, lo, hi);
    const auto reports = detect_anomalies(window, g, filter);
    AnomalyAnalysis out{lo, static_cast<std::size_t>(hi - lo) + 1, {}};
    for (std::size_t i = 0; i < panel.cities.size(); ++i) {
        const auto obs = window.cities[i].cases;
        const auto pred = predictions[i].between(lo, hi);
        auto es = error_series(panel.cities[i].city_id, obs.values(), pred.values());
        const auto m = match_errors_anomalies(es.significant_days, reports[i].anomalous_days, out.num_days);
        out.cities.push_back({std::move(es), reports[i], m});
    }
    return out;
}

}  // namespace eemdx
