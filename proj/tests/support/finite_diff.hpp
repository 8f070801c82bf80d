#pragma once

// Central-difference gradient oracle, independent of the analytic backward
// passes it checks.

#include <cmath>
#include <functional>
#include <vector>

namespace testing_support {

// grad[i] = (f(p+eps*e_i) - f(p-eps*e_i)) / (2*eps), where the coordinates are
// exposed as a vector of pointers so any parameter storage can be probed.
template <class R>
std::vector<double> finite_difference_gradient(const std::function<double()>& f, const std::vector<R*>& coords,
                                               double epsilon) {
    std::vector<double> grad(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const R saved = *coords[i];
        *coords[i] = static_cast<R>(saved + epsilon);
        const double fp = f();
        *coords[i] = static_cast<R>(saved - epsilon);
        const double fm = f();
        *coords[i] = saved;
        grad[i] = (fp - fm) / (2.0 * epsilon);
    }
    return grad;
}

// Normalized worst-coordinate error between an analytic and a numeric
// gradient: max_i |a_i - b_i| / max(scale, floor).
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor_scale = 1e-8) {
    double scale = floor_scale;
    for (double a : analytic) scale = std::max(scale, std::fabs(a));
    for (double b : numeric) scale = std::max(scale, std::fabs(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, std::fabs(analytic[i] - numeric[i]));
    return worst / scale;
}

} // namespace testing_support
