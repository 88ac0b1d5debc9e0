#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "eemdx/error.hpp"
#include "eemdx/io.hpp"

namespace eemdx {

class DuplicateNodeError : public Error {
public:
    using Error::Error;
};

class GraphTooSmallError : public Error {
public:
    using Error::Error;
};

/// Dense row-major square matrix.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    bool operator==(const SquareMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

struct Eigensystem {
    std::vector<double> values;  // ascending
    SquareMatrix vectors;        // column l pairs with values[l]
};

namespace detail {

// One Jacobi rotation annihilating a(p, q), applied to a and accumulated into v.
inline void jacobi_rotate(SquareMatrix& a, SquareMatrix& v, std::size_t p, std::size_t q) {
    const double apq = a(p, q);
    if (apq == 0.0) return;
    const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
    const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = t * c;
    const std::size_t n = a.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double akp = a(k, p), akq = a(k, q);
        a(k, p) = c * akp - s * akq;
        a(k, q) = s * akp + c * akq;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double apk = a(p, k), aqk = a(q, k);
        a(p, k) = c * apk - s * aqk;
        a(q, k) = s * apk + c * aqk;
    }
    a(p, q) = a(q, p) = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double vkp = v(k, p), vkq = v(k, q);
        v(k, p) = c * vkp - s * vkq;
        v(k, q) = s * vkp + c * vkq;
    }
}

}  // namespace detail

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
/// Eigenvalues ascend; eigenvectors are sign-normalised (first clearly non-zero entry
/// positive) and equal eigenvalues are ordered by comparing their vectors lexicographically.
inline Eigensystem symmetric_eigen(SquareMatrix a) {
    const std::size_t n = a.size();
    SquareMatrix v(n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) total += a(i, j) * a(i, j);
    }
    const double target = 1e-30 * std::max(total, 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off <= target) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) detail::jacobi_rotate(a, v, p, q);
        }
    }

    std::vector<std::vector<double>> cols(n, std::vector<double>(n));
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t k = 0; k < n; ++k) cols[l][k] = v(k, l);
        const auto lead = std::find_if(cols[l].begin(), cols[l].end(), [](double x) { return std::abs(x) > 1e-10; });
        if (lead != cols[l].end() && *lead < 0) {
            for (double& x : cols[l]) x = -x;
        }
    }
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    const double tie = 1e-9 * scale;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Sort by value first, then group near-equal values and order each group by vector.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && a(order[j], order[j]) - a(order[i], order[i]) <= tie) ++j;
        std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(j),
                         [&](std::size_t x, std::size_t y) { return cols[x] > cols[y]; });
        i = j;
    }

    Eigensystem out{std::vector<double>(n), SquareMatrix(n)};
    for (std::size_t l = 0; l < n; ++l) {
        out.values[l] = a(order[l], order[l]);
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, l) = cols[order[l]][k];
    }
    return out;
}

struct City {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
};

enum class WeightMode { literal_distance, gaussian_kernel };

inline WeightMode parse_weight_mode(const std::string& s) {
    if (s == "literal-distance") return WeightMode::literal_distance;
    if (s == "gaussian-kernel") return WeightMode::gaussian_kernel;
    throw InvalidArgument("unknown weight mode '" + s + "' (expected literal-distance or gaussian-kernel)");
}

/// Great-circle distance in km on a sphere of radius 6371 km.
inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusKm = 6371.0;
    const double rad = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * rad, dlon = (lon2 - lon1) * rad;
    const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
    const double hc = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(hc), std::sqrt(1.0 - hc));
}

using GraphSignal = std::vector<double>;

/// Complete weighted graph over cities with its Laplacian spectrum.
class CityGraph {
public:
    /// Graph with explicit symmetric, non-negative weights (diagonal ignored).
    static CityGraph from_weights(std::vector<std::string> ids, SquareMatrix w) {
        if (ids.size() < 2) throw GraphTooSmallError("a graph needs at least 2 nodes, got " + std::to_string(ids.size()));
        if (w.size() != ids.size()) throw DimensionError("weight matrix does not match the node count");
        std::set<std::string> seen;
        for (const auto& id : ids) {
            if (!seen.insert(id).second) throw DuplicateNodeError("duplicate node '" + id + "'");
        }
        const std::size_t n = ids.size();
        for (std::size_t i = 0; i < n; ++i) {
            w(i, i) = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                if (!(w(i, j) >= 0.0) || !std::isfinite(w(i, j)) || w(i, j) != w(j, i)) {
                    throw InvalidArgument("weights must be finite, non-negative and symmetric");
                }
            }
        }
        CityGraph g;
        g.ids_ = std::move(ids);
        g.laplacian_ = SquareMatrix(n);
        for (std::size_t i = 0; i < n; ++i) {
            double degree = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                degree += w(i, j);
                g.laplacian_(i, j) = -w(i, j);
            }
            g.laplacian_(i, i) = degree;
        }
        g.weights_ = std::move(w);
        auto es = symmetric_eigen(g.laplacian_);
        g.eigenvalues_ = std::move(es.values);
        g.eigenvectors_ = std::move(es.vectors);
        return g;
    }

    const std::vector<std::string>& node_ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const SquareMatrix& weights() const noexcept { return weights_; }
    const SquareMatrix& laplacian() const noexcept { return laplacian_; }
    const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
    const SquareMatrix& eigenvectors() const noexcept { return eigenvectors_; }

    std::size_t index_of(const std::string& id) const {
        const auto it = std::find(ids_.begin(), ids_.end(), id);
        if (it == ids_.end()) throw ReferenceError("unknown node '" + id + "'");
        return static_cast<std::size_t>(it - ids_.begin());
    }

private:
    std::vector<std::string> ids_;
    SquareMatrix weights_;
    SquareMatrix laplacian_;
    std::vector<double> eigenvalues_;
    SquareMatrix eigenvectors_;
};

/// Complete graph over the cities. literal_distance weights each edge by its great-circle
/// distance in km; gaussian_kernel uses exp(-d^2 / (2 theta^2)) with theta the median distance.
inline CityGraph build_graph(const std::vector<City>& cities, WeightMode mode = WeightMode::literal_distance) {
    if (cities.size() < 2) throw GraphTooSmallError("a graph needs at least 2 cities, got " + std::to_string(cities.size()));
    const std::size_t n = cities.size();
    SquareMatrix w(n);
    std::vector<double> pairwise;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = haversine_km(cities[i].lat, cities[i].lon, cities[j].lat, cities[j].lon);
            w(i, j) = w(j, i) = d;
            pairwise.push_back(d);
        }
    }
    if (mode == WeightMode::gaussian_kernel) {
        std::sort(pairwise.begin(), pairwise.end());
        const std::size_t m = pairwise.size();
        const double theta = m % 2 ? pairwise[m / 2] : 0.5 * (pairwise[m / 2 - 1] + pairwise[m / 2]);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                // All cities at one point: every pair is maximally similar.
                const double k = theta > 0 ? std::exp(-w(i, j) * w(i, j) / (2 * theta * theta)) : 1.0;
                w(i, j) = w(j, i) = k;
            }
        }
    }
    std::vector<std::string> ids;
    ids.reserve(n);
    for (const auto& c : cities) ids.push_back(c.id);
    return CityGraph::from_weights(std::move(ids), std::move(w));
}

namespace detail {

inline void check_signal(const CityGraph& g, std::span<const double> x) {
    if (x.size() != g.size()) {
        throw DimensionError("signal has " + std::to_string(x.size()) + " values, graph has " + std::to_string(g.size()) +
                             " nodes");
    }
}

}  // namespace detail

/// Graph Fourier transform: coefficients U^T x, ordered by ascending eigenvalue.
inline GraphSignal gft(const CityGraph& g, std::span<const double> x) {
    detail::check_signal(g, x);
    const auto& u = g.eigenvectors();
    GraphSignal out(g.size(), 0.0);
    for (std::size_t l = 0; l < g.size(); ++l) {
        for (std::size_t k = 0; k < g.size(); ++k) out[l] += u(k, l) * x[k];
    }
    return out;
}

inline GraphSignal igft(const CityGraph& g, std::span<const double> xh) {
    detail::check_signal(g, xh);
    const auto& u = g.eigenvectors();
    GraphSignal out(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        for (std::size_t l = 0; l < g.size(); ++l) out[k] += u(k, l) * xh[l];
    }
    return out;
}

struct SpectralFilter {
    enum class Kind { accentuate, lowpass };
    Kind kind = Kind::accentuate;
    double parameter = 1.0;  // gain alpha, or cutoff fraction kappa

    static SpectralFilter accentuate(double alpha = 1.0) { return {Kind::accentuate, alpha}; }
    static SpectralFilter lowpass(double kappa = 0.5) { return {Kind::lowpass, kappa}; }

    void validate() const {
        if (kind == Kind::accentuate && !(parameter >= 0.0)) {
            throw InvalidArgument("accentuator gain must be >= 0, got " + format_number(parameter));
        }
        if (kind == Kind::lowpass && !(parameter > 0.0 && parameter <= 1.0)) {
            throw InvalidArgument("low-pass cutoff must lie in (0, 1], got " + format_number(parameter));
        }
    }

    /// Gain applied to coefficient l (0-based) of a graph with the given spectrum.
    double gain(std::size_t l, const std::vector<double>& eigenvalues) const {
        if (kind == Kind::accentuate) {
            const double lmax = eigenvalues.back();
            return lmax > 0 ? 1.0 + parameter * eigenvalues[l] / lmax : 1.0;
        }
        const auto keep = static_cast<std::size_t>(std::ceil(parameter * static_cast<double>(eigenvalues.size())));
        return l < keep ? 1.0 : 0.0;
    }
};

/// Scales each spectral coefficient by the filter's gain and transforms back.
inline GraphSignal apply_filter(const CityGraph& g, std::span<const double> x, const SpectralFilter& f) {
    f.validate();
    auto xh = gft(g, x);
    for (std::size_t l = 0; l < xh.size(); ++l) xh[l] *= f.gain(l, g.eigenvalues());
    return igft(g, xh);
}

/// Edge list id_i,id_j,w_ij over i < j.
inline std::string edges_to_csv(const CityGraph& g) {
    std::string out = "id_i,id_j,w_ij\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            out += g.node_ids()[i] + ',' + g.node_ids()[j] + ',' + format_number(g.weights()(i, j)) + '\n';
        }
    }
    return out;
}

/// 1-based index and eigenvalue per row.
inline std::string spectrum_to_csv(const CityGraph& g) {
    std::string out = "index,eigenvalue\n";
    for (std::size_t l = 0; l < g.size(); ++l) {
        out += std::to_string(l + 1) + ',' + format_number(g.eigenvalues()[l]) + '\n';
    }
    return out;
}

}  // namespace eemdx
