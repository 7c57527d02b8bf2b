#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/common.hpp"

namespace raceline {

struct SplineSpec {
    int degree = 3;
    double lower = 0.0;
    double upper = 1650.0;
    std::vector<double> internal_knots = {90.0, 250.0, 800.0, 1207.0, 1375.0};
};

// Clamped B-spline basis over cumulative forward distance. Inputs above the
// upper boundary clamp to it (late-race overrun), negative inputs are errors.
class BSplineBasis {
public:
    explicit BSplineBasis(const SplineSpec& spec) : degree_(spec.degree) {
        if (spec.degree < 1 || spec.degree > 7)
            throw std::invalid_argument("spline: degree must be between 1 and 7");
        if (!(spec.lower < spec.upper))
            throw std::invalid_argument("spline: boundary knots out of order");
        double prev = spec.lower;
        for (double k : spec.internal_knots) {
            if (k <= prev)
                throw std::invalid_argument("spline: knot vector not strictly increasing");
            prev = k;
        }
        if (!spec.internal_knots.empty() && spec.internal_knots.back() >= spec.upper)
            throw std::invalid_argument("spline: interior knot beyond the upper boundary");

        for (int i = 0; i <= degree_; ++i) knots_.push_back(spec.lower);
        for (double k : spec.internal_knots) knots_.push_back(k);
        for (int i = 0; i <= degree_; ++i) knots_.push_back(spec.upper);
        dim_ = static_cast<int>(spec.internal_knots.size()) + degree_ + 1;
        lower_ = spec.lower;
        upper_ = spec.upper;
    }

    int dimension() const { return dim_; }
    int order() const { return degree_ + 1; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }

    // Writes the degree+1 nonzero basis values into vals and returns the
    // index of the first, so the full row is zero outside
    // [first, first + degree].
    int row_sparse(double j, double* vals) const {
        if (j < 0.0)
            throw std::invalid_argument(
                strprintf("spline: negative distance %g", j));
        double x = j > upper_ ? upper_ : j;

        // knot span: last index k with knots_[k] <= x < knots_[k+1]
        int k = degree_ + static_cast<int>(std::upper_bound(knots_.begin() + degree_ + 1,
                                                            knots_.end() - degree_ - 1, x) -
                                           (knots_.begin() + degree_ + 1));
        if (k > dim_ - 1) k = dim_ - 1;

        vals[0] = 1.0;
        std::array<double, 8> left{}, right{};
        for (int d = 1; d <= degree_; ++d) {
            left[d] = x - knots_[k + 1 - d];
            right[d] = knots_[k + d] - x;
            double saved = 0.0;
            for (int r = 0; r < d; ++r) {
                double temp = vals[r] / (right[r + 1] + left[d - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            vals[d] = saved;
        }
        return k - degree_;
    }

    std::vector<double> row(double j) const {
        std::vector<double> out(dim_, 0.0);
        double vals[8];
        int first = row_sparse(j, vals);
        for (int i = 0; i <= degree_; ++i) out[static_cast<size_t>(first + i)] = vals[i];
        return out;
    }

    double eval(double j, const double* coef) const {
        double vals[8];
        int first = row_sparse(j, vals);
        double sum = 0.0;
        for (int i = 0; i <= degree_; ++i) sum += vals[i] * coef[first + i];
        return sum;
    }

    double eval(double j, const std::vector<double>& coef) const {
        if (static_cast<int>(coef.size()) != dim_)
            throw std::invalid_argument("spline: coefficient length does not match basis");
        return eval(j, coef.data());
    }

    const std::vector<double>& knots() const { return knots_; }

private:
    int degree_;
    int dim_ = 0;
    double lower_ = 0.0, upper_ = 0.0;
    std::vector<double> knots_;
};

}  // namespace raceline
