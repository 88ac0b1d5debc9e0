#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eemdx/error.hpp"
#include "eemdx/io.hpp"
#include "eemdx/optimize.hpp"
#include "eemdx/timeseries.hpp"

namespace eemdx {

/// ARIMAX(p, d, q, n): AR order, differencing order, MA order, exogenous count.
struct ArimaxOrder {
    std::size_t p = 0;
    std::size_t d = 0;
    std::size_t q = 0;
    std::size_t n = 0;

    /// Free parameters counted by the information criterion: p + q + n plus constant and variance.
    std::size_t num_parameters() const noexcept { return p + q + n + 2; }

    std::string str() const {
        return "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + "," + std::to_string(n) + ")";
    }

    bool operator==(const ArimaxOrder&) const = default;
};

/// Default search bounds for automatic order selection.
inline constexpr ArimaxOrder kDefaultOrderBounds{5, 2, 5, 0};

/// Fitted model W_t = eta + sum phi_i W_{t-i} - sum theta_j e_{t-j} + sum zeta_l Y_l(t) + e_t,
/// where W is the d-times differenced dependent series and Y_l the identically differenced exogenous series.
struct ArimaxModel {
    ArimaxOrder order;
    double eta = 0.0;
    std::vector<double> phi;
    std::vector<double> theta;
    std::vector<double> zeta;
    double sigma2 = 0.0;
    double log_likelihood = 0.0;
    double aicc = 0.0;
    std::vector<double> heads;  // first d values of the training series
    double css = 0.0;
    std::size_t nobs = 0;
    std::size_t iterations = 0;
    std::vector<std::string> exog_names;

    bool operator==(const ArimaxModel&) const = default;
};

/// Raised when the optimiser hits its iteration caps; carries the best point found.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, ArimaxModel best) : Error(what), best_(std::move(best)) {}
    const ArimaxModel& best_so_far() const noexcept { return best_; }

private:
    ArimaxModel best_;
};

class UndefinedCriterionError : public Error {
public:
    using Error::Error;
};

class SelectionError : public Error {
public:
    SelectionError(const std::string& what, std::vector<std::string> failures)
        : Error(what), failures_(std::move(failures)) {}
    const std::vector<std::string>& failures() const noexcept { return failures_; }

private:
    std::vector<std::string> failures_;
};

/// Small-sample corrected AIC: -2 loglik + 2k + 2k(k+1)/(nobs-k-1).
inline double aicc(double log_likelihood, std::size_t k, std::size_t nobs) {
    if (nobs <= k + 1) {
        throw UndefinedCriterionError("AICc undefined for " + std::to_string(k) + " parameters and " +
                                      std::to_string(nobs) + " observations");
    }
    const double kk = static_cast<double>(k);
    return -2.0 * log_likelihood + 2.0 * kk + 2.0 * kk * (kk + 1.0) / static_cast<double>(nobs - k - 1);
}

inline constexpr double kMaxPartialCorrelation = 1.0 - 1e-6;

/// Maps unconstrained reals to the coefficients of an invertible polynomial
/// 1 - c_1 B - ... - c_q B^q, via partial autocorrelations tanh(u_k) and the Durbin-Levinson recursion.
inline std::vector<double> pacf_to_coefficients(std::span<const double> u) {
    std::vector<double> c;
    c.reserve(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        // Kept strictly inside (-1, 1) where tanh saturates in floating point.
        const double r = std::clamp(std::tanh(u[k]), -kMaxPartialCorrelation, kMaxPartialCorrelation);
        std::vector<double> next(k + 1);
        for (std::size_t j = 0; j < k; ++j) next[j] = c[j] - r * c[k - 1 - j];
        next[k] = r;
        c = std::move(next);
    }
    return c;
}

namespace detail {

struct CssProblem {
    std::size_t p = 0, q = 0, n = 0;
    Eigen::VectorXd w;   // differenced dependent series
    Eigen::MatrixXd Z;   // regressors: constant, p lags (pre-sample = mean), n exogenous
};

inline void check_shapes(const TimeSeries& y, const std::vector<TimeSeries>& exog, std::size_t n) {
    if (exog.size() != n) {
        throw DimensionError("model expects " + std::to_string(n) + " exogenous series, got " +
                             std::to_string(exog.size()));
    }
    for (const auto& x : exog) {
        if (x.size() != y.size()) {
            throw DimensionError("exogenous series '" + x.name() + "' has length " + std::to_string(x.size()) +
                                 ", dependent has " + std::to_string(y.size()));
        }
    }
}

inline CssProblem make_problem(const TimeSeries& y, const std::vector<TimeSeries>& exog, const ArimaxOrder& order) {
    CssProblem pr;
    pr.p = order.p;
    pr.q = order.q;
    pr.n = order.n;
    const auto w = difference(y, order.d);
    const auto m = static_cast<Eigen::Index>(w.size());
    pr.w = Eigen::Map<const Eigen::VectorXd>(w.values().data(), m);
    const double wbar = mean(w.values());
    pr.Z.resize(m, static_cast<Eigen::Index>(1 + order.p + order.n));
    pr.Z.col(0).setOnes();
    for (std::size_t i = 1; i <= order.p; ++i) {
        for (Eigen::Index t = 0; t < m; ++t) {
            const auto lag = t - static_cast<Eigen::Index>(i);
            pr.Z(t, static_cast<Eigen::Index>(i)) = lag >= 0 ? pr.w(lag) : wbar;
        }
    }
    for (std::size_t l = 0; l < order.n; ++l) {
        const auto x = difference(exog[l], order.d);
        pr.Z.col(static_cast<Eigen::Index>(1 + order.p + l)) = Eigen::Map<const Eigen::VectorXd>(x.values().data(), m);
    }
    return pr;
}

/// Applies v_t <- v_t + sum theta_j v_{t-j} (zero initial state) to every column in place.
inline void ma_inverse_filter(Eigen::Ref<Eigen::MatrixXd> m, std::span<const double> theta) {
    if (theta.empty()) return;
    const Eigen::Index rows = m.rows();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double* col = m.col(c).data();
        for (Eigen::Index t = 1; t < rows; ++t) {
            double acc = col[t];
            for (std::size_t j = 1; j <= theta.size() && static_cast<Eigen::Index>(j) <= t; ++j) {
                acc += theta[j - 1] * col[t - static_cast<Eigen::Index>(j)];
            }
            col[t] = acc;
        }
    }
}

struct Profiled {
    Eigen::VectorXd beta;
    double css = 0.0;
};

/// For fixed MA coefficients the innovations are affine in (eta, phi, zeta), so those are
/// solved exactly by least squares; returns the minimising coefficients and the CSS.
inline Profiled profile(const CssProblem& pr, std::span<const double> theta) {
    Eigen::MatrixXd m(pr.w.size(), pr.Z.cols() + 1);
    m.col(0) = pr.w;
    m.rightCols(pr.Z.cols()) = pr.Z;
    ma_inverse_filter(m, theta);
    const auto fz = m.rightCols(pr.Z.cols());
    Profiled out;
    out.beta = fz.completeOrthogonalDecomposition().solve(m.col(0));
    out.css = (m.col(0) - fz * out.beta).squaredNorm();
    return out;
}

}  // namespace detail

/// One-step innovations e_t of the model on the d-times differenced series
/// (pre-sample observations at the series mean, pre-sample innovations zero).
inline std::vector<double> innovations(const ArimaxModel& model, const TimeSeries& y, const std::vector<TimeSeries>& exog) {
    detail::check_shapes(y, exog, model.order.n);
    if (model.order.d >= y.size()) throw TooShortError("series shorter than the differencing order");
    const auto pr = detail::make_problem(y, exog, model.order);
    Eigen::VectorXd beta(pr.Z.cols());
    beta(0) = model.eta;
    for (std::size_t i = 0; i < model.order.p; ++i) beta(static_cast<Eigen::Index>(1 + i)) = model.phi[i];
    for (std::size_t l = 0; l < model.order.n; ++l) beta(static_cast<Eigen::Index>(1 + model.order.p + l)) = model.zeta[l];
    Eigen::VectorXd r = pr.w - pr.Z * beta;
    detail::ma_inverse_filter(r, model.theta);
    return std::vector<double>(r.data(), r.data() + r.size());
}

/// Conditional sum of squared innovations of `model` on (y, exog).
inline double conditional_sum_of_squares(const ArimaxModel& model, const TimeSeries& y, const std::vector<TimeSeries>& exog) {
    double s = 0.0;
    for (double e : innovations(model, y, exog)) s += e * e;
    return s;
}

namespace detail {

inline void finish_statistics(ArimaxModel& m, std::span<const double> w) {
    double ms = 0.0;
    for (double v : w) ms += v * v;
    ms /= static_cast<double>(w.size());
    // Perfect fits (zero CSS) get a variance floor relative to the data scale so the
    // likelihood stays finite and equally perfect models are ranked by parsimony.
    const double floor = std::max(1e-12 * ms, 1e-300);
    m.sigma2 = std::max(m.css / static_cast<double>(m.nobs), floor);
    m.log_likelihood = -0.5 * static_cast<double>(m.nobs) * (std::log(2.0 * std::numbers::pi * m.sigma2) + 1.0);
    m.aicc = aicc(m.log_likelihood, m.order.num_parameters(), m.nobs);
}

}  // namespace detail

struct FitOptions {
    NelderMeadOptions simplex{500, 1e-10, 0.5};
    BfgsOptions polish{200, 1e-10, 1e-6};
};

/// Conditional-sum-of-squares estimation of the ARIMAX model of the given order.
inline ArimaxModel fit(const TimeSeries& y, const std::vector<TimeSeries>& exog, ArimaxOrder order,
                       const FitOptions& options = {}) {
    detail::check_shapes(y, exog, order.n);
    const std::size_t needed = order.p + order.q + order.n + order.d + 1;
    if (y.size() <= needed) {
        throw TooShortError("ARIMAX" + order.str() + " needs more than " + std::to_string(needed) +
                            " observations, got " + std::to_string(y.size()));
    }
    const auto pr = detail::make_problem(y, exog, order);

    ArimaxModel model;
    model.order = order;
    model.heads = difference_heads(y.values(), order.d);
    model.nobs = y.size() - order.d;
    for (const auto& x : exog) model.exog_names.push_back(x.name());

    std::vector<double> u(order.q, 0.0);
    bool converged = true;
    if (order.q > 0) {
        const Objective objective = [&](std::span<const double> v) {
            return detail::profile(pr, pacf_to_coefficients(v)).css;
        };
        const auto simplex = nelder_mead(objective, u, options.simplex);
        const auto polished = bfgs(objective, simplex.x, options.polish);
        u = polished.value <= simplex.value ? polished.x : simplex.x;
        model.iterations = simplex.iterations + polished.iterations;
        converged = simplex.converged || polished.converged;
    }
    model.theta = pacf_to_coefficients(u);
    const auto prof = detail::profile(pr, model.theta);
    model.eta = prof.beta(0);
    for (std::size_t i = 0; i < order.p; ++i) model.phi.push_back(prof.beta(static_cast<Eigen::Index>(1 + i)));
    for (std::size_t l = 0; l < order.n; ++l) model.zeta.push_back(prof.beta(static_cast<Eigen::Index>(1 + order.p + l)));
    model.css = prof.css;
    detail::finish_statistics(model, std::span<const double>(pr.w.data(), static_cast<std::size_t>(pr.w.size())));

    if (!converged) {
        throw NonConvergenceError("ARIMAX" + order.str() + " did not converge within the iteration caps (best CSS " +
                                      format_number(model.css) + ")",
                                  model);
    }
    return model;
}

/// Largest modulus among the inverse roots of 1 - c_1 B - ... - c_k B^k
/// (below 1 means stationary for AR, invertible for MA).
inline double max_inverse_root_modulus(std::span<const double> c) {
    const auto k = static_cast<Eigen::Index>(c.size());
    if (k == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) companion(0, j) = c[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < k; ++i) companion(i, i - 1) = 1.0;
    return companion.eigenvalues().cwiseAbs().maxCoeff();
}

struct SelectionOptions {
    FitOptions fit;
    /// Candidates with an AR or MA root inside this radius are excluded (inverse-root modulus above 1/radius).
    double min_root_modulus = 1.01;
    /// Cap on p + q across the grid.
    std::size_t max_pq = 5;
};

/// Grid search over p <= bounds.p, d <= bounds.d, q <= bounds.q with p + q <= max_pq (n fixed by exog),
/// minimising AICc.
/// Ties go to the smaller p + q, then the smaller p, then the smaller d. Candidates whose AR part is
/// near non-stationary or whose MA part is near non-invertible are skipped.
inline ArimaxModel select_order(const TimeSeries& y, const std::vector<TimeSeries>& exog, const ArimaxOrder& bounds,
                                const SelectionOptions& options = {}) {
    std::vector<std::string> failures;
    std::optional<ArimaxModel> best;
    const auto better = [](const ArimaxModel& a, const ArimaxModel& b) {
        if (a.aicc != b.aicc) return a.aicc < b.aicc;
        const auto pq_a = a.order.p + a.order.q, pq_b = b.order.p + b.order.q;
        if (pq_a != pq_b) return pq_a < pq_b;
        if (a.order.p != b.order.p) return a.order.p < b.order.p;
        return a.order.d < b.order.d;
    };
    for (std::size_t d = 0; d <= bounds.d; ++d) {
        for (std::size_t p = 0; p <= bounds.p; ++p) {
            for (std::size_t q = 0; q <= bounds.q && p + q <= options.max_pq; ++q) {
                const ArimaxOrder order{p, d, q, exog.size()};
                try {
                    auto m = fit(y, exog, order, options.fit);
                    if (!std::isfinite(m.aicc)) {
                        failures.push_back(order.str() + ": non-finite AICc");
                        continue;
                    }
                    const double limit = 1.0 / options.min_root_modulus;
                    if (max_inverse_root_modulus(m.phi) > limit || max_inverse_root_modulus(m.theta) > limit) {
                        failures.push_back(order.str() + ": AR or MA root too close to the unit circle");
                        continue;
                    }
                    if (!best || better(m, *best)) best = std::move(m);
                } catch (const Error& e) {
                    failures.push_back(order.str() + ": " + e.what());
                }
            }
        }
    }
    if (!best) {
        std::string msg = "order selection failed for every candidate of '" + y.name() + "'";
        for (const auto& f : failures) msg += "\n  " + f;
        throw SelectionError(msg, std::move(failures));
    }
    return *best;
}

/// One-step-ahead in-sample predictions on the original scale, same length as y.
/// The first d values are the integration heads; the next max(p, q) carry only the
/// constant and exogenous terms on the differenced scale.
inline TimeSeries fitted_values(const ArimaxModel& model, const TimeSeries& y, const std::vector<TimeSeries>& exog) {
    const auto e = innovations(model, y, exog);
    const std::size_t d = model.order.d;
    const std::size_t warmup = std::max(model.order.p, model.order.q);
    const auto w = difference(y, d);
    std::vector<TimeSeries> dx;
    dx.reserve(exog.size());
    for (const auto& x : exog) dx.push_back(difference(x, d));

    std::vector<double> out(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (t < d) {
            out[t] = y[t];
            continue;
        }
        const std::size_t k = t - d;  // index on the differenced scale
        double w_hat;
        if (k < warmup) {
            w_hat = model.eta;
            for (std::size_t l = 0; l < dx.size(); ++l) w_hat += model.zeta[l] * dx[l][k];
        } else {
            w_hat = w[k] - e[k];
        }
        // y_t = w_t + (y_t - w_t), where the bracket depends on past observations only.
        out[t] = w_hat + (y[t] - w[k]);
    }
    return TimeSeries(y.start(), std::move(out), y.name() + ".fitted");
}

/// Multi-step point forecasts continuing y for `horizon` days; future innovations are zero.
/// `future_exog` holds the exogenous values on the forecast days (one series per regressor).
inline std::vector<double> forecast(const ArimaxModel& model, const TimeSeries& y, const std::vector<TimeSeries>& exog,
                                    std::size_t horizon, const std::vector<std::vector<double>>& future_exog = {}) {
    const std::size_t n = model.order.n;
    if (future_exog.size() != n) {
        throw DimensionError("forecast needs future values for " + std::to_string(n) + " exogenous series");
    }
    for (const auto& f : future_exog) {
        if (f.size() != horizon) throw DimensionError("future exogenous values must cover the horizon");
    }
    const auto e = innovations(model, y, exog);
    const std::size_t d = model.order.d;
    const auto wts = difference(y, d);
    std::vector<double> w = wts.vector();
    std::vector<double> innov = e;
    const double wbar = mean(wts.values());

    // Differenced future exogenous values need the last d observed exogenous values.
    std::vector<std::vector<double>> fx(n);
    for (std::size_t l = 0; l < n; ++l) {
        std::vector<double> joined = exog[l].vector();
        joined.insert(joined.end(), future_exog[l].begin(), future_exog[l].end());
        const auto dj = difference(TimeSeries(exog[l].start(), joined), d);
        fx[l].assign(dj.vector().end() - static_cast<std::ptrdiff_t>(horizon), dj.vector().end());
    }

    const std::size_t hist = w.size();
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t t = hist + h;
        double v = model.eta;
        for (std::size_t i = 1; i <= model.order.p; ++i) v += model.phi[i - 1] * (t >= i ? w[t - i] : wbar);
        for (std::size_t j = 1; j <= model.order.q; ++j) {
            if (t >= j && t - j < hist) v -= model.theta[j - 1] * innov[t - j];
        }
        for (std::size_t l = 0; l < n; ++l) v += model.zeta[l] * fx[l][h];
        w.push_back(v);
    }
    const auto heads = difference_heads(y.values(), d);
    const auto full = integrate_values(w, d, heads);
    return std::vector<double>(full.end() - static_cast<std::ptrdiff_t>(horizon), full.end());
}

/// Self-describing `key value...` text record of a fitted model.
inline std::string to_text(const ArimaxModel& m) {
    std::ostringstream os;
    const auto list = [&](const char* key, const std::vector<double>& v) {
        os << key;
        for (double x : v) os << ' ' << format_number(x);
        os << '\n';
    };
    os << "# arimax model\n";
    os << "order " << m.order.p << ' ' << m.order.d << ' ' << m.order.q << ' ' << m.order.n << '\n';
    os << "eta " << format_number(m.eta) << '\n';
    list("phi", m.phi);
    list("theta", m.theta);
    list("zeta", m.zeta);
    os << "exog";
    for (const auto& name : m.exog_names) os << ' ' << name;
    os << '\n';
    os << "sigma2 " << format_number(m.sigma2) << '\n';
    os << "log_likelihood " << format_number(m.log_likelihood) << '\n';
    os << "aicc " << format_number(m.aicc) << '\n';
    os << "css " << format_number(m.css) << '\n';
    os << "nobs " << m.nobs << '\n';
    list("heads", m.heads);
    return os.str();
}

inline ArimaxModel model_from_text(const std::string& text) {
    ArimaxModel m;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_order = false;
    const auto numbers = [&](std::istringstream& ls) {
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) v.push_back(parse_number(tok, lineno));
        return v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream ls(t);
        std::string key;
        ls >> key;
        if (key == "order") {
            if (!(ls >> m.order.p >> m.order.d >> m.order.q >> m.order.n)) throw ParseError("bad order line", lineno);
            have_order = true;
        } else if (key == "eta") {
            const auto v = numbers(ls);
            if (v.size() != 1) throw ParseError("eta takes one value", lineno);
            m.eta = v[0];
        } else if (key == "phi") {
            m.phi = numbers(ls);
        } else if (key == "theta") {
            m.theta = numbers(ls);
        } else if (key == "zeta") {
            m.zeta = numbers(ls);
        } else if (key == "heads") {
            m.heads = numbers(ls);
        } else if (key == "exog") {
            std::string name;
            while (ls >> name) m.exog_names.push_back(name);
        } else if (key == "sigma2" || key == "log_likelihood" || key == "aicc" || key == "css") {
            const auto v = numbers(ls);
            if (v.size() != 1) throw ParseError(key + " takes one value", lineno);
            (key == "sigma2" ? m.sigma2 : key == "aicc" ? m.aicc : key == "css" ? m.css : m.log_likelihood) = v[0];
        } else if (key == "nobs") {
            if (!(ls >> m.nobs)) throw ParseError("bad nobs", lineno);
        } else {
            throw ParseError("unknown key '" + key + "'", lineno);
        }
    }
    if (!have_order) throw ParseError("model record has no order line", 0);
    if (m.phi.size() != m.order.p || m.theta.size() != m.order.q || m.zeta.size() != m.order.n ||
        m.heads.size() != m.order.d) {
        throw ParseError("coefficient counts do not match order " + m.order.str(), 0);
    }
    return m;
}

}  // namespace eemdx
