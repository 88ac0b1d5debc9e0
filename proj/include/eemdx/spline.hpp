#pragma once

#include <span>
#include <string>
#include <vector>

#include "eemdx/error.hpp"

namespace eemdx {

struct Knot {
    double position;
    double value;
};

/// Natural cubic spline (zero second derivative at both end knots).
class NaturalCubicSpline {
public:
    /// Knots must have strictly increasing positions; at least two are required.
    explicit NaturalCubicSpline(std::vector<Knot> knots) : knots_(std::move(knots)) {
        const std::size_t n = knots_.size();
        if (n < 2) {
            throw DegenerateEnvelopeError("cubic spline needs at least 2 knots, got " + std::to_string(n));
        }
        for (std::size_t i = 1; i < n; ++i) {
            if (!(knots_[i].position > knots_[i - 1].position)) {
                throw InvalidArgument("spline knot positions must be strictly increasing");
            }
        }
        second_.assign(n, 0.0);
        if (n == 2) {
            return;
        }
        // Tridiagonal system for the interior second derivatives (Thomas algorithm).
        const std::size_t m = n - 2;
        std::vector<double> diag(m), upper(m), rhs(m);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = knots_[i].position - knots_[i - 1].position;
            const double h1 = knots_[i + 1].position - knots_[i].position;
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((knots_[i + 1].value - knots_[i].value) / h1 -
                                (knots_[i].value - knots_[i - 1].value) / h0);
        }
        for (std::size_t i = 1; i < m; ++i) {
            const double sub = knots_[i + 1].position - knots_[i].position;
            const double w = sub / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        second_[m] = rhs[m - 1] / diag[m - 1];
        for (std::size_t i = m - 1; i-- > 0;) {
            second_[i + 1] = (rhs[i] - upper[i] * second_[i + 2]) / diag[i];
        }
    }

    double operator()(double t) const { return eval_segment(segment_for(t), t); }

    /// Evaluates at 0, 1, ..., length-1.
    std::vector<double> sample(std::size_t length) const {
        std::vector<double> out(length);
        std::size_t seg = 0;
        for (std::size_t i = 0; i < length; ++i) {
            const double t = static_cast<double>(i);
            while (seg + 2 < knots_.size() && t > knots_[seg + 1].position) ++seg;
            out[i] = eval_segment(seg, t);
        }
        return out;
    }

    std::span<const Knot> knots() const noexcept { return knots_; }

private:
    std::size_t segment_for(double t) const {
        std::size_t seg = 0;
        while (seg + 2 < knots_.size() && t > knots_[seg + 1].position) ++seg;
        return seg;
    }

    // Segments beyond the outer knots extrapolate the end cubics.
    double eval_segment(std::size_t i, double t) const {
        const Knot& a = knots_[i];
        const Knot& b = knots_[i + 1];
        const double h = b.position - a.position;
        const double u = (b.position - t) / h;
        const double v = (t - a.position) / h;
        return u * a.value + v * b.value +
               ((u * u * u - u) * second_[i] + (v * v * v - v) * second_[i + 1]) * (h * h) / 6.0;
    }

    std::vector<Knot> knots_;
    std::vector<double> second_;
};

}  // namespace eemdx
