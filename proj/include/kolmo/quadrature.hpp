#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace kolmo {

/// Adaptive Gauss-Kronrod 15-point quadrature on [a, b].
template <typename F>
inline double adaptive_integrate(F&& f, double a, double b, double tol, int max_depth = 14) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), a, b, max_depth, tol, &err);
}

} // namespace kolmo
