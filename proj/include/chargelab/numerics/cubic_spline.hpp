#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "chargelab/errors.hpp"

namespace chargelab {

/// Natural cubic spline through (t_i, y_i). C2 on [t_front, t_back];
/// evaluation outside the knot range is a DomainError, extrapolation is
/// never silent.
class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> t, std::vector<double> y)
        : t_(std::move(t)), y_(std::move(y)) {
        const std::size_t n = t_.size();
        if (n < 3) throw ConfigError("CubicSpline: need at least 3 knots");
        if (y_.size() != n) throw ConfigError("CubicSpline: knot/value size mismatch");
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (!(t_[i] < t_[i + 1]))
                throw ConfigError("CubicSpline: knots must be strictly increasing");

        // Second derivatives M_i from the natural conditions M_0 = M_{n-1} = 0,
        // tridiagonal Thomas solve.
        m2_.assign(n, 0.0);
        std::vector<double> diag(n, 0.0), rhs(n, 0.0), sub(n, 0.0);
        diag[0] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = t_[i] - t_[i - 1];
            const double h1 = t_[i + 1] - t_[i];
            sub[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        diag[n - 1] = 1.0;
        // forward elimination (upper diagonal of row i is h1, equal to sub[i+1])
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double w = sub[i] / diag[i - 1];
            const double upper_prev = (i >= 2) ? (t_[i] - t_[i - 1]) : 0.0;
            diag[i] -= w * upper_prev;
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 1; i-- > 1;) {
            const double upper = t_[i + 1] - t_[i];
            m2_[i] = (rhs[i] - upper * m2_[i + 1]) / diag[i];
        }
    }

    double t_front() const { return t_.front(); }
    double t_back() const { return t_.back(); }
    const std::vector<double>& knots() const { return t_; }

    double value(double t) const {
        const auto [i, a, b, h] = locate(t);
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m2_[i] + (b * b * b - b) * m2_[i + 1]) * h * h / 6.0;
    }

    double derivative(double t) const {
        const auto [i, a, b, h] = locate(t);
        return (y_[i + 1] - y_[i]) / h +
               ((3.0 * b * b - 1.0) * m2_[i + 1] - (3.0 * a * a - 1.0) * m2_[i]) * h / 6.0;
    }

    double second_derivative(double t) const {
        const auto [i, a, b, h] = locate(t);
        return a * m2_[i] + b * m2_[i + 1];
    }

  private:
    struct Loc {
        std::size_t i;
        double a, b, h;
    };

    Loc locate(double t) const {
        if (!(t >= t_.front() && t <= t_.back()))
            throw DomainError("CubicSpline: t = " + std::to_string(t) + " outside [" +
                              std::to_string(t_.front()) + ", " + std::to_string(t_.back()) + "]");
        std::size_t lo = 0, hi = t_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (t_[mid] <= t ? lo : hi) = mid;
        }
        const double h = t_[lo + 1] - t_[lo];
        const double b = (t - t_[lo]) / h;
        return {lo, 1.0 - b, b, h};
    }

    std::vector<double> t_, y_, m2_;
};

} // namespace chargelab
