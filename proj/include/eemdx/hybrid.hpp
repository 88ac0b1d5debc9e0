#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eemdx/arimax.hpp"
#include "eemdx/eemd.hpp"
#include "eemdx/io.hpp"
#include "eemdx/stats.hpp"

namespace eemdx {

struct HybridConfig {
    EemdConfig eemd;
    ArimaxOrder arimax_bounds = kDefaultOrderBounds;
    /// One order per level (s IMF levels, then the residual); replaces the search when set.
    /// The n field is ignored: it always equals the number of exogenous series.
    std::optional<std::vector<ArimaxOrder>> per_level_orders;
    SelectionOptions selection;

    void validate() const {
        eemd.validate();
        if (per_level_orders && per_level_orders->size() != eemd.num_imfs + 1) {
            throw InvalidArgument("per-level orders need " + std::to_string(eemd.num_imfs + 1) + " entries, got " +
                                  std::to_string(per_level_orders->size()));
        }
    }
};

struct HybridFit {
    std::vector<ArimaxModel> level_models;  // IMF levels 1..s, then the residual level
    std::vector<TimeSeries> level_fitted;
    TimeSeries prediction;
    Decomposition dependent_decomposition;
    std::vector<Decomposition> exog_decompositions;

    bool operator==(const HybridFit&) const = default;
};

/// A level fit that failed; names the level (s + 1 is the residual) and keeps the cause's message.
class LevelFitError : public Error {
public:
    LevelFitError(std::size_t level, const std::string& cause)
        : Error("level " + std::to_string(level) + ": " + cause), level_(level) {}
    std::size_t level() const noexcept { return level_; }

private:
    std::size_t level_;
};

struct DecomposedInputs {
    Decomposition dependent;
    std::vector<Decomposition> exog;
};

/// EEMD of the dependent series (sub-seed index 0) and of each exogenous series
/// (sub-seed index i + 1), so adding a regressor leaves the other decompositions unchanged.
inline DecomposedInputs decompose_all(const TimeSeries& x, const std::vector<TimeSeries>& exog, const EemdConfig& cfg) {
    for (const auto& e : exog) {
        if (e.size() != x.size() || e.start() != x.start()) {
            throw AlignmentError("exogenous series '" + e.name() + "' is not aligned with '" + x.name() + "'");
        }
    }
    const auto run = [&](const TimeSeries& s, std::size_t index) {
        EemdConfig c = cfg;
        c.rng_seed = derive_seed(cfg.rng_seed, index);
        try {
            return eemd(s, c);
        } catch (const Error& err) {
            throw Error("decomposing '" + s.name() + "': " + err.what());
        }
    };
    DecomposedInputs out{run(x, 0), {}};
    out.exog.reserve(exog.size());
    for (std::size_t i = 0; i < exog.size(); ++i) out.exog.push_back(run(exog[i], i + 1));
    return out;
}

struct LevelFit {
    ArimaxModel model;
    TimeSeries fitted;
};

/// Fits level j (1..s, or s + 1 for the residual) of the dependent series against the
/// same level of every exogenous series. With `order` set the search is skipped.
inline LevelFit fit_level(std::size_t j, const Decomposition& dep, const std::vector<Decomposition>& exogs,
                          const ArimaxOrder& bounds, const std::optional<ArimaxOrder>& order = std::nullopt,
                          const SelectionOptions& selection = {}) {
    try {
        const TimeSeries& y = dep.level(j);
        std::vector<TimeSeries> regressors;
        regressors.reserve(exogs.size());
        for (const auto& e : exogs) regressors.push_back(e.level(j));
        ArimaxModel model;
        if (order) {
            model = fit(y, regressors, {order->p, order->d, order->q, regressors.size()}, selection.fit);
        } else {
            model = select_order(y, regressors, {bounds.p, bounds.d, bounds.q, regressors.size()}, selection);
        }
        auto fitted = fitted_values(model, y, regressors);
        return {std::move(model), std::move(fitted)};
    } catch (const LevelFitError&) {
        throw;
    } catch (const Error& e) {
        throw LevelFitError(j, e.what());
    }
}

/// Decomposes everything, fits every level and sums the level fits into the prediction.
inline HybridFit fit_hybrid(const TimeSeries& x, const std::vector<TimeSeries>& exog, const HybridConfig& cfg) {
    cfg.validate();
    auto inputs = decompose_all(x, exog, cfg.eemd);
    const std::size_t levels = cfg.eemd.num_imfs + 1;
    HybridFit out{{}, {}, x.with_values(std::vector<double>(x.size(), 0.0)), std::move(inputs.dependent),
                  std::move(inputs.exog)};
    std::vector<double> sum(x.size(), 0.0);
    for (std::size_t j = 1; j <= levels; ++j) {
        const auto order = cfg.per_level_orders ? std::optional<ArimaxOrder>((*cfg.per_level_orders)[j - 1]) : std::nullopt;
        auto lf = fit_level(j, out.dependent_decomposition, out.exog_decompositions, cfg.arimax_bounds, order,
                            cfg.selection);
        for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += lf.fitted[t];
        out.level_models.push_back(std::move(lf.model));
        out.level_fitted.push_back(std::move(lf.fitted));
    }
    out.prediction = TimeSeries(x.start(), std::move(sum), x.name() + ".predicted");
    return out;
}

inline Metrics evaluate(const HybridFit& fit, const TimeSeries& observed) {
    return metrics(fit.prediction.values(), observed.values());
}

/// CSV with date, observed, predicted, one column per IMF level and the residual level.
inline std::string hybrid_to_csv(const HybridFit& fit, const TimeSeries& observed) {
    if (observed.size() != fit.prediction.size()) throw DimensionError("observed and prediction lengths differ");
    const std::size_t s = fit.level_fitted.empty() ? 0 : fit.level_fitted.size() - 1;
    std::string out = "date,observed,predicted";
    for (std::size_t j = 1; j <= s; ++j) out += ",level_" + std::to_string(j);
    out += ",residual_level\n";
    for (std::size_t t = 0; t < observed.size(); ++t) {
        out += observed.date_at(t).iso() + ',' + format_number(observed[t]) + ',' + format_number(fit.prediction[t]);
        for (const auto& level : fit.level_fitted) out += ',' + format_number(level[t]);
        out += '\n';
    }
    return out;
}

}  // namespace eemdx
