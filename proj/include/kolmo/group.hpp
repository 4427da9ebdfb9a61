#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

#include "kolmo/block_structure.hpp"

namespace kolmo {

/// E(sigma) = exp(-sigma B^T) as the exact finite series: B^T is nilpotent
/// of index n+1, so the sum has n+1 terms and no truncation error.
inline Matrix matrix_E(const BlockStructure& s, double sigma) {
    Matrix E = Matrix::Identity(s.N, s.N);
    Matrix term = Matrix::Identity(s.N, s.N);
    const Matrix Bt = s.B.transpose();
    for (int k = 1; k <= s.n; ++k) {
        term = (term * Bt) * (-sigma / k);
        E += term;
    }
    return E;
}

/// Group law: z o zeta = (xi + E(tau) x, t + tau).
inline Point compose(const BlockStructure& s, const Point& z, const Point& zeta) {
    return Point(zeta.x + matrix_E(s, zeta.t) * z.x, z.t + zeta.t);
}

/// Group inverse: z^{-1} = (-E(-t) x, -t).
inline Point inverse(const BlockStructure& s, const Point& z) {
    return Point(-(matrix_E(s, -z.t) * z.x), -z.t);
}

/// Spatial dilation D_r: block i scales by r^{2i+1}.
inline Vector dilate_spatial(const BlockStructure& s, double r, const Vector& x) {
    if (!(r > 0.0)) throw std::invalid_argument("dilate_spatial: r must be positive");
    Vector y(s.N);
    for (int i = 0; i <= s.n; ++i) {
        double w = BlockStructure::block_weight(r, i);
        y.segment(s.offsets[static_cast<size_t>(i)], s.p[static_cast<size_t>(i)]) =
            w * s.block_of(x, i);
    }
    return y;
}

/// Group automorphism delta_r(x, t) = (D_r x, r^2 t).
inline Point dilate(const BlockStructure& s, double r, const Point& z) {
    return Point(dilate_spatial(s, r, z.x), r * r * z.t);
}

/// Homogeneous norm |x|_B = sum_i |x^(i)|^{1/(2i+1)}.
inline double norm_B(const BlockStructure& s, const Vector& x) {
    double v = 0.0;
    for (int i = 0; i <= s.n; ++i) {
        double m = s.block_of(x, i).norm();
        v += std::pow(m, 1.0 / (2 * i + 1));
    }
    return v;
}

/// Space-time homogeneous norm ||z||_B = |x|_B + |t|^{1/2}.
inline double norm_B_spacetime(const BlockStructure& s, const Point& z) {
    return norm_B(s, z.x) + std::sqrt(std::abs(z.t));
}

namespace detail {

// Golden-section minimisation of f along the great circle through the unit
// vector x and the tangent direction w, over angle [-span, span].
template <typename F>
inline void refine_on_circle(F&& f, Vector& x, double& fx, const Vector& w, double span,
                             double tol) {
    constexpr double invphi = 0.6180339887498949;
    auto eval = [&](double th) { return f((std::cos(th) * x + std::sin(th) * w).eval()); };
    double a = -span, b = span;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = eval(c), fd = eval(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - invphi * (b - a);
            fc = eval(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + invphi * (b - a);
            fd = eval(d);
        }
    }
    double th = 0.5 * (a + b);
    double fth = eval(th);
    if (fth < fx) {
        x = (std::cos(th) * x + std::sin(th) * w).normalized();
        fx = fth;
    }
}

template <typename F>
inline std::pair<Vector, double> optimize_on_sphere(const BlockStructure& s, F&& f,
                                                    std::uint64_t seed, double tol,
                                                    int max_passes) {
    // Seed stage: a deterministic quasi-uniform cloud of >= 1000*N directions.
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int count = std::max(1000 * s.N, 4096);
    Vector best;
    double fbest = std::numeric_limits<double>::infinity();
    Vector cand(s.N);
    for (int k = 0; k < count; ++k) {
        for (int i = 0; i < s.N; ++i) cand(i) = gauss(gen);
        double nrm = cand.norm();
        if (nrm < 1e-12) continue;
        cand /= nrm;
        double fc = f(cand);
        if (fc < fbest) { fbest = fc; best = cand; }
    }
    // Coordinate axes are the non-smooth points of |.|_B; include them.
    for (int i = 0; i < s.N; ++i) {
        Vector e = Vector::Zero(s.N);
        e(i) = 1.0;
        double fe = f(e);
        if (fe < fbest) { fbest = fe; best = e; }
    }

    // Refinement: derivative-free golden-section sweeps along the great
    // circles through each coordinate axis, with shrinking angular span.
    double span = 0.5;
    for (int pass = 0; pass < max_passes; ++pass) {
        double before = fbest;
        for (int i = 0; i < s.N; ++i) {
            Vector e = Vector::Zero(s.N);
            e(i) = 1.0;
            Vector w = e - e.dot(best) * best;
            double nw = w.norm();
            if (nw < 1e-14) continue;
            w /= nw;
            refine_on_circle(f, best, fbest, w, span, 1e-3 * tol);
        }
        span = std::max(0.5 * span, 64 * tol);
        if (before - fbest < tol && pass > 4) return {best, fbest};
    }
    throw std::runtime_error("optimize_on_sphere: tolerance not met after max refinements");
}

} // namespace detail

/// Extremes of |.|_B on the Euclidean unit sphere:
/// sigma0 = min, sigma_bar = max. Absolute tolerance ~1e-9.
inline std::pair<double, double> sigma_bounds(const BlockStructure& s,
                                              std::uint64_t seed = kDefaultSeed) {
    if (s.n == 0) return {1.0, 1.0};  // |x|_B = |x| on a single block
    auto fmin = [&](const Vector& x) { return norm_B(s, x); };
    auto fmax = [&](const Vector& x) { return -norm_B(s, x); };
    auto lo = detail::optimize_on_sphere(s, fmin, seed, 1e-9, 200);
    auto hi = detail::optimize_on_sphere(s, fmax, seed + 1, 1e-9, 200);
    return {lo.second, -hi.second};
}

} // namespace kolmo
