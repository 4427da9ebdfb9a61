#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace kolmo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Space-time point z = (x, t) in R^{N+1}.
struct Point {
    Vector x;
    double t = 0.0;

    Point() = default;
    Point(Vector x_, double t_) : x(std::move(x_)), t(t_) {}

    static Point origin(int N) { return Point(Vector::Zero(N), 0.0); }
};

/// Default seed used by every deterministic sampler in the library.
inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

} // namespace kolmo
