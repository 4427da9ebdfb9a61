#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

#include "kolmo/group.hpp"

namespace kolmo {

/**
 * Group cylinder Q_r^{t1,t2}(z0) = z0 o (B_r(0) x (t1,t2)): the left
 * translate of a homogeneous ball times a relative time window.
 */
struct Cylinder {
    Point center;
    double r = 1.0;
    double t1 = -1.0;
    double t2 = 0.0;
};

inline Cylinder centered_cylinder(int N, double r, double t1, double t2) {
    return Cylinder{Point::origin(N), r, t1, t2};
}

/// z0^{-1} o z: the coordinates of z relative to the cylinder frame.
inline Point to_cylinder_frame(const BlockStructure& s, const Cylinder& c, const Point& z) {
    return compose(s, inverse(s, c.center), z);
}

inline bool membership(const BlockStructure& s, const Cylinder& c, const Point& z) {
    Point w = to_cylinder_frame(s, c, z);
    return norm_B(s, w.x) < c.r && w.t > c.t1 && w.t < c.t2;
}

/// Parabolic boundary: base B_r x {t1} union lateral shell dB_r x [t1,t2].
inline bool on_parabolic_boundary(const BlockStructure& s, const Cylinder& c, const Point& z,
                                  double tol) {
    Point w = to_cylinder_frame(s, c, z);
    double nb = norm_B(s, w.x);
    bool base = std::abs(w.t - c.t1) <= tol && nb <= c.r + tol;
    bool lateral = std::abs(nb - c.r) <= tol && w.t >= c.t1 - tol && w.t <= c.t2 + tol;
    return base || lateral;
}

/// Monte Carlo estimate with its standard error.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// |B_1(0)| = |{ |x|_B < 1 }| by rejection sampling in [-1,1]^N
/// (each block must have Euclidean norm < 1). Deterministic under seed.
inline McEstimate unit_ball_measure(const BlockStructure& s, std::uint64_t seed = kDefaultSeed,
                                    long samples = 1L << 21) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(s.N);
    long hits = 0;
    for (long k = 0; k < samples; ++k) {
        for (int i = 0; i < s.N; ++i) x(i) = u(gen);
        if (norm_B(s, x) < 1.0) ++hits;
    }
    double box = std::pow(2.0, s.N);
    double p = double(hits) / double(samples);
    return {box * p, box * std::sqrt(std::max(p * (1.0 - p), 0.0) / double(samples))};
}

/// |Q_r^{t1,t2}(z0)| = |B_1| r^Q (t2 - t1): translation-invariant and
/// enforced through the scaling law, so only |B_1| is stochastic.
inline double cylinder_measure(const BlockStructure& s, const Cylinder& c, double unit_ball) {
    return unit_ball * std::pow(c.r, s.Q) * (c.t2 - c.t1);
}

/// Uniform sample from the centered homogeneous ball B_r(0), by rejection.
inline Vector sample_in_ball(const BlockStructure& s, double r, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(s.N);
    while (true) {
        for (int i = 0; i < s.N; ++i) x(i) = u(gen);
        if (norm_B(s, x) < 1.0) return dilate_spatial(s, r, x);
    }
}

/// Uniform sample from the (open) cylinder.
inline Point sample_in_cylinder(const BlockStructure& s, const Cylinder& c,
                                std::mt19937_64& gen) {
    std::uniform_real_distribution<double> ut(c.t1, c.t2);
    Point w(sample_in_ball(s, c.r, gen), ut(gen));
    return compose(s, c.center, w);
}

/// Sample from the |.|_B-sphere of radius r: a ball sample pushed to the
/// sphere along dilations. Heuristic density; used only for universal checks.
inline Vector sample_on_sphere(const BlockStructure& s, double r, std::mt19937_64& gen) {
    while (true) {
        Vector x = sample_in_ball(s, 1.0, gen);
        double nb = norm_B(s, x);
        if (nb > 1e-6) return dilate_spatial(s, r / nb, x);
    }
}

/// Sample from the lateral shell dB_r x [t1,t2] of a cylinder.
inline Point sample_on_shell(const BlockStructure& s, const Cylinder& c, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> ut(c.t1, c.t2);
    Point w(sample_on_sphere(s, c.r, gen), ut(gen));
    return compose(s, c.center, w);
}

/// Sample from the parabolic boundary, base and lateral shell weighted by a
/// surface heuristic (uniform sphere x time on the shell, uniform ball on
/// the base).
inline Point sample_on_parabolic_boundary(const BlockStructure& s, const Cylinder& c,
                                          std::mt19937_64& gen) {
    double base_w = std::pow(c.r, s.Q);
    double lat_w = s.Q * std::pow(c.r, s.Q - 2) * (c.t2 - c.t1);
    std::uniform_real_distribution<double> u(0.0, base_w + lat_w);
    if (u(gen) < base_w) {
        Point w(sample_in_ball(s, c.r, gen), c.t1);
        return compose(s, c.center, w);
    }
    return sample_on_shell(s, c, gen);
}

/**
 * The named cylinders of the kernel bounds and the Harnack geometry:
 *   Q1 = Q_{Kr}^{-b_B r^2, 0}(z0)           (solve domain)
 *   Q2 = Q_{sigma0 r}^{-b_B r^2/4, 0}(z0)   (lower-bound core)
 *   Q3 = Q_{sigma0 r}^{-b_B r^2, -b_B r^2/2}(z0)  (mass window)
 *   S1 = lateral shell of Q1
 *   Qminus = Q_{sigma0 r/2}^{-3 b_B r^2/4, -b_B r^2/2}(z0)
 *   Qplus  = Q_{sigma0 r/2}^{-b_B r^2/4, 0}(z0)
 */
struct NamedCylinders {
    Cylinder Q1, Q2, Q3, Qminus, Qplus;
};

inline NamedCylinders named_cylinders(const Point& z0, double r, double sigma0, double b_B,
                                      double K) {
    NamedCylinders nc;
    double br2 = b_B * r * r;
    nc.Q1 = Cylinder{z0, K * r, -br2, 0.0};
    nc.Q2 = Cylinder{z0, sigma0 * r, -0.25 * br2, 0.0};
    nc.Q3 = Cylinder{z0, sigma0 * r, -br2, -0.5 * br2};
    nc.Qminus = Cylinder{z0, 0.5 * sigma0 * r, -0.75 * br2, -0.5 * br2};
    nc.Qplus = Cylinder{z0, 0.5 * sigma0 * r, -0.25 * br2, 0.0};
    return nc;
}

/**
 * Structural constants of the cylinder-in-cylinder inclusions.
 *
 * C1 caps rho/R for: the time budget, the shear bound validity, the direct
 * radius budget over K, and the (E(t)-I) correction absorbed at rate
 * (delta2-delta1)/2. C2 mirrors the same chain at radius sigma0/2 with the
 * correction absorbed at rate sigma0 (delta2-delta1)/8 and the quarter time
 * budget. The Monte Carlo inclusion checks below are the arbiter.
 */
struct InclusionConstants {
    double C1 = 0.0;
    double C2 = 0.0;
};

inline InclusionConstants inclusion_constants(const BlockStructure& s, double sigma0,
                                              double sigma_bar, double b_B, double K) {
    double nhalf = s.n + 0.5;
    double shear_cap = 1.0 / (sigma_bar * std::sqrt(b_B));
    auto correction_term = [&](double gamma) {
        if (s.c_nB == 0.0) return std::numeric_limits<double>::infinity();
        double base = gamma * std::pow(sigma0, (2.0 * s.n + 1) / 3.0) /
                      (s.c_nB * std::pow(sigma_bar, (2.0 * s.n - 2) / 3.0));
        return shear_cap * std::pow(base, nhalf);
    };
    InclusionConstants ic;
    ic.C1 = std::min({1.0, shear_cap, 1.0 / (2.0 * K), correction_term(0.5)});
    ic.C2 = std::min({sigma0 / 8.0, 0.25, shear_cap, correction_term(sigma0 / 8.0)});
    return ic;
}

namespace detail {

inline bool inside_with_slack(const BlockStructure& s, const Cylinder& c, const Point& z,
                              double slack) {
    Point w = to_cylinder_frame(s, c, z);
    return norm_B(s, w.x) < c.r * (1.0 + slack) && w.t > c.t1 - slack * std::abs(c.t1) &&
           w.t < c.t2 + slack * std::max(std::abs(c.t1), std::abs(c.t2));
}

} // namespace detail

/// Inclusion check (i): translates of Q_{K rho}^{-b_B rho^2,0} seated anywhere
/// in the (1/2+delta1)-cylinder stay inside the (1/2+delta2)-cylinder when
/// rho <= C1 R (delta2-delta1)^{n+1/2}. Returns the violation count
/// (expected 0; rho_inflate is for adversarial runs).
inline long check_inclusion_i(const BlockStructure& s, double sigma0, double sigma_bar,
                              double b_B, double K, double R, double delta1, double delta2,
                              long samples, std::mt19937_64& gen, double rho_inflate = 1.0) {
    if (!(0.0 <= delta1 && delta1 < delta2 && delta2 <= 0.5))
        throw std::invalid_argument("check_inclusion_i: need 0 <= delta1 < delta2 <= 1/2");
    auto ic = inclusion_constants(s, sigma0, sigma_bar, b_B, K);
    double rho = rho_inflate * ic.C1 * R * std::pow(delta2 - delta1, s.n + 0.5);

    Cylinder seat = centered_cylinder(s.N, R * (0.5 + delta1), -b_B * R * R * (0.5 + delta1), 0.0);
    Cylinder target =
        centered_cylinder(s.N, R * (0.5 + delta2), -b_B * R * R * (0.5 + delta2), 0.0);
    Cylinder small = centered_cylinder(s.N, K * rho, -b_B * rho * rho, 0.0);

    long violations = 0;
    for (long k = 0; k < samples; ++k) {
        // 1 in 5 seats on the parabolic boundary to stress the closure.
        Point z0 = (k % 5 == 0) ? sample_on_parabolic_boundary(s, seat, gen)
                                : sample_in_cylinder(s, seat, gen);
        Point zeta = sample_in_cylinder(s, small, gen);
        Point z = compose(s, z0, zeta);
        if (!detail::inside_with_slack(s, target, z, 1e-12)) ++violations;
    }
    return violations;
}

/// Inclusion check (ii): small cylinders seated on the parabolic boundary of
/// the mid annulus cylinder land in the (delta2)-annulus and avoid the
/// (delta1)-cylinder, for rho <= C2 R (delta2-delta1)^{n+1/2}.
inline long check_inclusion_ii(const BlockStructure& s, double sigma0, double sigma_bar,
                               double b_B, double K, double R, double delta1, double delta2,
                               long samples, std::mt19937_64& gen, double rho_inflate = 1.0) {
    if (!(0.0 <= delta1 && delta1 < delta2 && delta2 <= 1.0))
        throw std::invalid_argument("check_inclusion_ii: need 0 <= delta1 < delta2 <= 1");
    auto ic = inclusion_constants(s, sigma0, sigma_bar, b_B, K);
    double rho = rho_inflate * ic.C2 * R * std::pow(delta2 - delta1, s.n + 0.5);

    auto annulus_cyl = [&](double d) {
        return centered_cylinder(s.N, R * 0.5 * sigma0 * (1.0 + d),
                                 -0.25 * b_B * R * R * (3.0 + d * d), -0.5 * b_B * R * R);
    };
    double dmid = 0.5 * (delta1 + delta2);
    Cylinder seat = annulus_cyl(dmid);
    Cylinder outer = annulus_cyl(delta2);
    Cylinder inner = annulus_cyl(delta1);
    Cylinder small = centered_cylinder(s.N, rho, -b_B * rho * rho, 0.0);

    long violations = 0;
    for (long k = 0; k < samples; ++k) {
        Point z0 = sample_on_parabolic_boundary(s, seat, gen);
        Point zeta = sample_in_cylinder(s, small, gen);
        Point z = compose(s, z0, zeta);
        bool in_outer = detail::inside_with_slack(s, outer, z, 1e-12);
        bool in_inner = detail::inside_with_slack(s, inner, z, -1e-12);
        if (!in_outer || in_inner) ++violations;
    }
    return violations;
}

} // namespace kolmo
