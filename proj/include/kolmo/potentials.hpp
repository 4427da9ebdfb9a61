#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "kolmo/kernels.hpp"
#include "kolmo/quadrature.hpp"

namespace kolmo {

/**
 * Integration region E for the potential U_E: an indicator plus a bounding
 * box inside the strip R^N x (T1, T2). Cylinder and box regions carry exact
 * one-dimensional sections, which the quadrature exploits; generic regions
 * fall back to masked adaptive quadrature on the innermost axis.
 */
struct RegionE {
    enum class Shape { generic, box, cylinder };

    std::function<bool(const Point&)> indicator;
    Vector x_lo, x_hi;  // spatial bounding box
    double T1 = 0.0, T2 = 0.0;
    Shape shape = Shape::generic;
    Cylinder cyl;  // valid when shape == cylinder

    bool empty() const { return !(T2 > T1); }
};

inline RegionE region_from_box(const Vector& lo, const Vector& hi, double t1, double t2) {
    RegionE e;
    e.shape = RegionE::Shape::box;
    e.x_lo = lo;
    e.x_hi = hi;
    e.T1 = t1;
    e.T2 = t2;
    e.indicator = [lo, hi, t1, t2](const Point& z) {
        if (!(z.t > t1 && z.t < t2)) return false;
        for (int i = 0; i < lo.size(); ++i)
            if (!(z.x(i) > lo(i) && z.x(i) < hi(i))) return false;
        return true;
    };
    return e;
}

inline RegionE region_from_cylinder(const BlockStructure& s, const Cylinder& c) {
    RegionE e;
    e.shape = RegionE::Shape::cylinder;
    e.cyl = c;
    e.T1 = c.center.t + c.t1;
    e.T2 = c.center.t + c.t2;
    e.x_lo = Vector(s.N);
    e.x_hi = Vector(s.N);
    // Block-wise bounds of the centered ball; translation handled separately.
    for (int i = 0; i <= s.n; ++i) {
        double w = BlockStructure::block_weight(c.r, i);
        for (int k = 0; k < s.p[static_cast<size_t>(i)]; ++k) {
            e.x_lo(s.offsets[static_cast<size_t>(i)] + k) = -w;
            e.x_hi(s.offsets[static_cast<size_t>(i)] + k) = w;
        }
    }
    BlockStructure sc = s;
    Cylinder cc = c;
    e.indicator = [sc, cc](const Point& z) { return membership(sc, cc, z); };
    return e;
}

inline RegionE region_generic(std::function<bool(const Point&)> pred, const Vector& lo,
                              const Vector& hi, double t1, double t2) {
    RegionE e;
    e.shape = RegionE::Shape::generic;
    e.indicator = std::move(pred);
    e.x_lo = lo;
    e.x_hi = hi;
    e.T1 = t1;
    e.T2 = t2;
    return e;
}

/// delta_r(E) as a region: cylinders and boxes map to their own kind.
inline RegionE dilate_region(const BlockStructure& s, double r, const RegionE& e) {
    switch (e.shape) {
        case RegionE::Shape::cylinder: {
            Cylinder c{dilate(s, r, e.cyl.center), r * e.cyl.r, r * r * e.cyl.t1,
                       r * r * e.cyl.t2};
            return region_from_cylinder(s, c);
        }
        case RegionE::Shape::box:
            return region_from_box(dilate_spatial(s, r, e.x_lo), dilate_spatial(s, r, e.x_hi),
                                   r * r * e.T1, r * r * e.T2);
        case RegionE::Shape::generic:
        default: {
            auto pred = e.indicator;
            BlockStructure sc = s;
            double inv = 1.0 / r;
            return region_generic(
                [pred, sc, inv](const Point& z) { return pred(dilate(sc, inv, z)); },
                dilate_spatial(s, r, e.x_lo), dilate_spatial(s, r, e.x_hi), r * r * e.T1,
                r * r * e.T2);
        }
    }
}

namespace detail {

/// int_l^u exp(-(a x^2 + b x + c)) dx for a > 0, via erf/erfc with the
/// branch chosen to avoid cancellation of nearly-equal tails.
inline double gaussian_interval_mass(double a, double b, double c, double l, double u) {
    if (!(u > l)) return 0.0;
    double sa = std::sqrt(a);
    double mean = -b / (2.0 * a);
    double e0 = b * b / (4.0 * a) - c;
    double xl = sa * (l - mean), xu = sa * (u - mean);
    double diff;
    if (xl >= 0.0)
        diff = std::erfc(xl) - std::erfc(xu);
    else if (xu <= 0.0)
        diff = std::erfc(-xu) - std::erfc(-xl);
    else
        diff = std::erf(xu) - std::erf(xl);
    if (!(diff > 0.0)) return 0.0;
    return std::exp(e0) * 0.5 * std::sqrt(M_PI) / sa * diff;
}

struct SliceContext {
    const BlockStructure* s = nullptr;
    const RegionE* region = nullptr;
    Matrix G;       // E(d)^T C0^{-1}(d) E(d) / (4 beta)
    Vector g;       // E(d)^T C0^{-1}(d) x / (4 beta)
    double c = 0.0; // <C0^{-1}(d) x, x> / (4 beta)
    double pref = 0.0;  // d^{-sQ/2}
    double tau = 0.0;
    Vector xi;      // spatial point being assembled, outer coords first
    double tol = 1e-8;
};

/// Exact x-axis-0 section of the region at the already-fixed outer
/// coordinates; returns false when the section is empty.
inline bool axis0_section(const SliceContext& ctx, double& lo, double& hi) {
    const RegionE& e = *ctx.region;
    const BlockStructure& s = *ctx.s;
    switch (e.shape) {
        case RegionE::Shape::box:
            lo = e.x_lo(0);
            hi = e.x_hi(0);
            return hi > lo;
        case RegionE::Shape::cylinder: {
            double rest = 0.0;
            for (int i = 1; i <= s.n; ++i) {
                Vector blk = ctx.xi.segment(s.offsets[static_cast<size_t>(i)],
                                            s.p[static_cast<size_t>(i)]);
                rest += std::pow(blk.norm(), 1.0 / (2 * i + 1));
            }
            double R0 = e.cyl.r - rest;
            if (!(R0 > 0.0)) return false;
            double other2 = 0.0;
            for (int k = 1; k < s.p[0]; ++k) other2 += ctx.xi(k) * ctx.xi(k);
            double rad2 = R0 * R0 - other2;
            if (!(rad2 > 0.0)) return false;
            double rad = std::sqrt(rad2);
            lo = -rad;
            hi = rad;
            return true;
        }
        case RegionE::Shape::generic:
        default:
            lo = e.x_lo(0);
            hi = e.x_hi(0);
            return hi > lo;
    }
}

inline double integrate_axis(SliceContext& ctx, int axis);

/// Innermost axis: the integrand is exp(-(a x^2 + b x + c)) restricted to the
/// section, so box/cylinder sections integrate in closed form; generic
/// regions mask the indicator inside an adaptive quadrature.
inline double integrate_axis0(SliceContext& ctx) {
    double lo, hi;
    if (!axis0_section(ctx, lo, hi)) return 0.0;
    const int N = ctx.s->N;
    double a = ctx.G(0, 0);
    double b = -2.0 * ctx.g(0);
    double cc = ctx.c;
    for (int j = 1; j < N; ++j) {
        b += 2.0 * ctx.G(0, j) * ctx.xi(j);
        cc += -2.0 * ctx.g(j) * ctx.xi(j);
        for (int k = 1; k < N; ++k) cc += ctx.G(j, k) * ctx.xi(j) * ctx.xi(k);
    }
    if (ctx.region->shape != RegionE::Shape::generic)
        return ctx.pref * gaussian_interval_mass(a, b, cc, lo, hi);

    auto f = [&](double x0) {
        ctx.xi(0) = x0;
        Point z(ctx.xi, ctx.tau);
        if (!ctx.region->indicator(z)) return 0.0;
        return ctx.pref * std::exp(-(a * x0 * x0 + b * x0 + cc));
    };
    return adaptive_integrate(f, lo, hi, ctx.tol);
}

inline double integrate_axis(SliceContext& ctx, int axis) {
    if (axis == 0) return integrate_axis0(ctx);
    double lo = ctx.region->x_lo(axis), hi = ctx.region->x_hi(axis);
    auto f = [&](double v) {
        ctx.xi(axis) = v;
        return integrate_axis(ctx, axis - 1);
    };
    return adaptive_integrate(f, lo, hi, ctx.tol);
}

/// Spatial integral of Gamma(zeta^{-1} o z) over the slice E cap {time=tau},
/// as a function of the evaluation point z (time separation d = t - tau > 0).
inline double slice_integral(const KernelParams& kp, const RegionE& e, const Point& z,
                             double tau, double tol) {
    const BlockStructure& s = kp.structure;
    double d = z.t - tau;
    auto [Cinv, det] = invert_C(kp.cp, d);
    Matrix Ed = matrix_E(s, d);
    SliceContext ctx;
    ctx.s = &s;
    ctx.region = &e;
    Matrix M = Cinv / (4.0 * kp.beta);
    ctx.G = Ed.transpose() * M * Ed;
    ctx.g = Ed.transpose() * (M * z.x);
    ctx.c = z.x.dot(M * z.x);
    ctx.pref = std::pow(d, -0.5 * kp.s * s.Q);
    ctx.tau = tau;
    ctx.xi = Vector::Zero(s.N);
    ctx.tol = tol;
    return integrate_axis(ctx, s.N - 1);
}

} // namespace detail

/**
 * Barrier potential U_E(z) = int_E Gamma_{s,beta}(zeta^{-1} o z) dzeta by
 * nested adaptive quadrature: adaptive in time (with a power substitution
 * that removes the integrable (t-tau)^{(1-s)Q/2} blow-up at tau -> t), exact
 * Gaussian-interval masses on the innermost spatial axis, adaptive on the
 * outer spatial axes. Requires s < 1 + 2/Q.
 */
inline double potential(const KernelParams& kp, const RegionE& e, const Point& z, double tol) {
    const BlockStructure& s = kp.structure;
    if (!(kp.s < 1.0 + 2.0 / s.Q))
        throw std::invalid_argument("potential: requires s < 1 + 2/Q");
    if (!(tol > 0.0)) throw std::invalid_argument("potential: tol must be positive");
    if (e.empty()) return 0.0;

    // Work in the frame of a translated cylinder: U_{z0 o E0}(z) = U_{E0}(z0^{-1} o z).
    if (e.shape == RegionE::Shape::cylinder &&
        (e.cyl.center.x.norm() != 0.0 || e.cyl.center.t != 0.0)) {
        Cylinder centered = e.cyl;
        centered.center = Point::origin(s.N);
        return potential(kp, region_from_cylinder(s, centered),
                         to_cylinder_frame(s, e.cyl, z), tol);
    }

    if (!(z.t > e.T1)) return 0.0;
    double upper = std::min(e.T2, z.t);
    if (!(upper > e.T1)) return 0.0;

    double level_tol = 0.25 * tol;
    auto slice = [&](double tau) {
        return detail::slice_integral(kp, e, z, tau, level_tol);
    };

    if (z.t <= e.T2) {
        // Singular end at tau = t: tau = t - sig^kappa flattens the
        // (t-tau)^{(1-s)Q/2} blow-up (integrable since s < 1 + 2/Q).
        double growth = 1.0 + 0.5 * (1.0 - kp.s) * s.Q;  // > 0
        int kappa = 2 * static_cast<int>(std::ceil(0.75 / growth));
        kappa = std::max(kappa, 2);
        double smax = std::pow(z.t - e.T1, 1.0 / kappa);
        auto f = [&](double sig) {
            double tau = z.t - std::pow(sig, kappa);
            if (!(tau > e.T1) || !(tau < z.t)) return 0.0;
            return slice(tau) * kappa * std::pow(sig, kappa - 1);
        };
        return adaptive_integrate(f, 0.0, smax, level_tol);
    }
    return adaptive_integrate(slice, e.T1, upper, level_tol);
}

/**
 * Uniform strip bound: for E inside R^N x [T1, T2] and s < 1 + 2/Q,
 *   phi(z) = int_{R^N x [T1,T2]} Gamma(zeta^{-1} o z) dzeta <= C with
 *   C = (beta^{N/2} / c0) * (T2-T1)^{1+(1-s)Q/2} / (1 + (1-s)Q/2),
 * the Gaussian factor being exact by the substitution xi -> sqrt(beta) xi.
 */
inline double strip_bound(const KernelParams& kp, double T1, double T2) {
    const BlockStructure& s = kp.structure;
    if (!(kp.s < 1.0 + 2.0 / s.Q))
        throw std::invalid_argument("strip_bound: requires s < 1 + 2/Q");
    if (!(T2 > T1)) return 0.0;
    double gauss_factor = std::pow(kp.beta, 0.5 * s.N) / kp.c0;
    double growth = 1.0 + 0.5 * (1.0 - kp.s) * s.Q;
    double time_factor = std::pow(T2 - T1, growth) / growth;
    return gauss_factor * time_factor;
}

/// phi(z) for the full strip, by quadrature over a +-12-standard-deviation
/// box around the drift-transported centers (kernel mass outside is
/// negligible at the stated tolerances).
inline double potential_strip(const KernelParams& kp, const Point& z, double T1, double T2,
                              double tol) {
    const BlockStructure& s = kp.structure;
    if (!(z.t > T1)) return 0.0;
    double upper = std::min(T2, z.t);
    Matrix C_hi = kp.cp.eval(std::max(z.t - T1, 1e-12));
    Vector lo = Vector::Constant(s.N, std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(s.N, -std::numeric_limits<double>::infinity());
    for (int k = 0; k <= 8; ++k) {
        double d = std::max(z.t - T1, 1e-12) * k / 8.0;
        Vector center = matrix_E(s, -d) * z.x;
        for (int i = 0; i < s.N; ++i) {
            double sd = 12.0 * std::sqrt(std::max(2.0 * kp.beta * C_hi(i, i), 1e-30));
            lo(i) = std::min(lo(i), center(i) - sd);
            hi(i) = std::max(hi(i), center(i) + sd);
        }
    }
    (void)upper;
    return potential(kp, region_from_box(lo, hi, T1, T2), z, tol);
}

/// Both sides of the dilation identity U_{delta_r E}(delta_r z) =
/// r^{Q+2-sQ} U_E(z); the caller asserts equality to quadrature tolerance.
inline std::pair<double, double> scaling_check(const KernelParams& kp, const RegionE& e,
                                               double r, const Point& z, double tol) {
    const BlockStructure& s = kp.structure;
    double expo = s.Q + 2.0 - kp.s * s.Q;
    double factor = std::pow(r, expo);
    double lhs = potential(kp, dilate_region(s, r, e), dilate(s, r, z), tol * factor);
    double rhs = factor * potential(kp, e, z, tol);
    return {lhs, rhs};
}

} // namespace kolmo
