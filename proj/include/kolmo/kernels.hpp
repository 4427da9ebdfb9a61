#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kolmo/covariance.hpp"
#include "kolmo/fields.hpp"
#include "kolmo/geometry.hpp"

namespace kolmo {

/**
 * Gaussian-type kernel
 *   Gamma_{s,beta}(x,t) = t^{-sQ/2} exp(-<C0^{-1}(1) D_{1/sqrt t} x, D_{1/sqrt t} x>/(4 beta))
 * for t > 0 and 0 otherwise; delta_r-homogeneous of degree -sQ. All
 * evaluations route through log space and exponentiate last, so bound
 * comparisons never saturate.
 */
struct KernelParams {
    BlockStructure structure;
    double s = 1.0;
    double beta = 1.0;
    Matrix A0;
    CovariancePoly cp;
    // cached at t = 1
    Matrix Cinv1;
    double det_C1 = 0.0;
    double c0 = 0.0;  // (4 pi)^{-N/2} det(C0(1))^{-1/2}
};

inline KernelParams make_kernel(const BlockStructure& st, double s_exp, double beta,
                                const Matrix& A0) {
    if (!(s_exp > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("make_kernel: s and beta must be positive");
    KernelParams kp;
    kp.structure = st;
    kp.s = s_exp;
    kp.beta = beta;
    kp.A0 = A0;
    kp.cp = covariance_poly(st, A0);
    auto [inv, det] = invert_C(kp.cp, 1.0);
    kp.Cinv1 = inv;
    kp.det_C1 = det;
    kp.c0 = std::pow(4.0 * M_PI, -0.5 * st.N) / std::sqrt(det);
    return kp;
}

/// log Gamma_{s,beta}(z); -inf for t <= 0.
inline double log_gamma_sb(const KernelParams& kp, const Point& z) {
    if (!(z.t > 0.0)) return -std::numeric_limits<double>::infinity();
    Vector y = dilate_spatial(kp.structure, 1.0 / std::sqrt(z.t), z.x);
    double q = y.dot(kp.Cinv1 * y);
    return -0.5 * kp.s * kp.structure.Q * std::log(z.t) - q / (4.0 * kp.beta);
}

inline double gamma_sb(const KernelParams& kp, const Point& z) {
    return std::exp(log_gamma_sb(kp, z));
}

/// Fundamental-solution form with the kernel's A0:
/// (4 pi)^{-N/2} det(C0(t))^{-1/2} exp(-<C0^{-1}(t) x, x>/4); 0 for t <= 0.
/// Evaluated through C0(t) directly, not through the t=1 scaling form.
inline double gamma0(const KernelParams& kp, const Point& z) {
    if (!(z.t > 0.0)) return 0.0;
    auto [inv, det] = invert_C(kp.cp, z.t);
    double q = z.x.dot(inv * z.x);
    return std::pow(4.0 * M_PI, -0.5 * kp.structure.N) / std::sqrt(det) * std::exp(-0.25 * q);
}

/// Gamma_{s,beta}(zeta^{-1} o z); 0 when t <= tau.
inline double gamma_translated(const KernelParams& kp, const Point& zeta, const Point& z) {
    return gamma_sb(kp, compose(kp.structure, inverse(kp.structure, zeta), z));
}

inline double log_gamma_translated(const KernelParams& kp, const Point& zeta, const Point& z) {
    return log_gamma_sb(kp, compose(kp.structure, inverse(kp.structure, zeta), z));
}

/// Closed-form first/second space derivatives and time derivative at z
/// (pole-free region t > 0):
///   grad = -(1/2beta) Gamma C0^{-1}(t) x
///   hess = (1/2beta) Gamma (-C0^{-1}(t) + (1/2beta) (C0^{-1}x) (C0^{-1}x)^T)
///   dt   = (1/2beta) Gamma (-s beta tr(A0 C0^{-1}) + <C0' C0^{-1}x, C0^{-1}x>/2)
struct KernelDerivatives {
    double value = 0.0;
    Vector grad;
    Matrix hess;
    double dt = 0.0;
};

inline KernelDerivatives kernel_derivatives(const KernelParams& kp, const Point& z) {
    if (!(z.t > 0.0)) throw std::invalid_argument("kernel_derivatives: requires t > 0");
    const int N = kp.structure.N;
    KernelDerivatives kd;
    kd.value = gamma_sb(kp, z);
    auto [Cinv, det] = invert_C(kp.cp, z.t);
    Vector y = Cinv * z.x;
    double ib = 1.0 / (2.0 * kp.beta);
    kd.grad = -ib * kd.value * y;
    kd.hess = ib * kd.value * (-Cinv + ib * (y * y.transpose()));
    Matrix Cd = kp.cp.eval_derivative(z.t);
    kd.dt = ib * kd.value *
            (-kp.s * kp.beta * (kp.A0 * Cinv).trace() + 0.5 * y.dot(Cd * y));
    (void)N;
    return kd;
}

/// L_A Gamma_{s,beta}(zeta^{-1} o .) evaluated at z, with A(z) from the field,
/// by the closed form
///   (1/2beta) Gamma [ tr((s beta A0 - A(z)) C0^{-1}) + <((1/beta)A(z) - A0) y, y>/2 ],
/// y = C0^{-1}(t-tau)(x - E(t-tau) xi). The grouping keeps each bracket term
/// exactly zero for the constant field A == A0.
struct KernelAction {
    double value = 0.0;  // L_A Gamma at z
    double scale = 0.0;  // pre-cancellation magnitude of the bracket terms
    double kernel = 0.0; // Gamma_{s,beta}(zeta^{-1} o z)
};

inline KernelAction apply_LA_to_kernel(const CoefficientField& field, const KernelParams& kp,
                                       const Point& zeta, const Point& z) {
    const BlockStructure& st = kp.structure;
    Point w = compose(st, inverse(st, zeta), z);
    if (!(w.t > 0.0))
        throw std::invalid_argument("apply_LA_to_kernel: requires t > tau");
    auto [Cinv, det] = invert_C(kp.cp, w.t);
    Vector y = Cinv * w.x;
    Matrix Az = field.full(st, z);
    double g = gamma_sb(kp, w);
    double ib = 1.0 / (2.0 * kp.beta);

    double tr_term = ((kp.s * kp.beta * kp.A0 - Az) * Cinv).trace();
    double quad_term = 0.5 * y.dot((Az / kp.beta - kp.A0) * y);
    KernelAction act;
    act.kernel = g;
    act.value = ib * g * (tr_term + quad_term);
    double tr_mag = kp.s * kp.beta * std::abs((kp.A0 * Cinv).trace()) +
                    std::abs((Az * Cinv).trace());
    double quad_mag = 0.5 * (std::abs(y.dot(Az * y)) / kp.beta + std::abs(y.dot(kp.A0 * y)));
    act.scale = ib * g * (tr_mag + quad_mag) + std::numeric_limits<double>::min();
    return act;
}

/// Direct assembly tr(A(z) hess) + <x_w, B grad> - dt on the translated
/// coordinates; must agree with the closed form (cross-check route).
inline double apply_LA_direct(const CoefficientField& field, const KernelParams& kp,
                              const Point& zeta, const Point& z) {
    const BlockStructure& st = kp.structure;
    Point w = compose(st, inverse(st, zeta), z);
    if (!(w.t > 0.0)) throw std::invalid_argument("apply_LA_direct: requires t > tau");
    KernelDerivatives kd = kernel_derivatives(kp, w);
    Matrix Az = field.full(st, z);
    return (Az * kd.hess).trace() + w.x.dot(st.B * kd.grad) - kd.dt;
}

/**
 * H2 subsolution certificate around z0: with the kernel built from
 * A0 = A(z0) and (s, beta) = (1 + s0, 2/(2+s0)), checks
 *   omega(eps0) <= (s0/(2+s0)) lambda
 * and samples L_A Gamma(zeta^{-1} o .) over Q_{eps0}^{-eps0^2, eps0^2}(z0).
 * Reports the worst sampled sign margin (relative to local scale) and the
 * minimum eigenvalues of M1 = (1/beta)A - A(z0), M2 = s beta A(z0) - A.
 */
struct H2SubsolutionReport {
    double eps0 = 0.0;
    double omega_at_eps0 = 0.0;
    double omega_bound = 0.0;
    double min_relative_value = 0.0;  // min over samples of value/scale
    double min_eig_M1 = 0.0;
    double min_eig_M2 = 0.0;
    long samples = 0;
    bool pass = false;
};

inline H2SubsolutionReport check_subsolution_H2(const BlockStructure& st,
                                                const CoefficientField& field, const Point& z0,
                                                double eps0, long samples,
                                                std::mt19937_64& gen, double s0 = -1.0) {
    if (!field.has_modulus())
        throw std::invalid_argument("check_subsolution_H2: field has no modulus of continuity");
    if (s0 <= 0.0) s0 = 1.0 / st.Q;
    if (!(s0 < 2.0 / st.Q))
        throw std::invalid_argument("check_subsolution_H2: need 0 < s0 < 2/Q");
    double bound = s0 / (2.0 + s0) * field.lambda;
    double om = field.modulus(eps0);
    if (!(om <= bound + 1e-15))
        throw std::invalid_argument(
            "check_subsolution_H2: omega(eps0) too large for the requested s0");

    KernelParams kp = make_kernel(st, 1.0 + s0, 2.0 / (2.0 + s0),
                                  field.full(st, z0));
    H2SubsolutionReport rep;
    rep.eps0 = eps0;
    rep.omega_at_eps0 = om;
    rep.omega_bound = bound;
    rep.min_relative_value = std::numeric_limits<double>::infinity();
    rep.min_eig_M1 = std::numeric_limits<double>::infinity();
    rep.min_eig_M2 = std::numeric_limits<double>::infinity();
    rep.samples = samples;

    Cylinder nbhd{z0, eps0, -eps0 * eps0, eps0 * eps0};
    Matrix A0b = field.block(z0);
    double sb = (1.0 + s0) * (2.0 / (2.0 + s0));
    long done = 0;
    while (done < samples) {
        Point z = sample_in_cylinder(st, nbhd, gen);
        Point zeta = sample_in_cylinder(st, nbhd, gen);
        Point w = compose(st, inverse(st, zeta), z);
        // pairs with t <= tau contribute the identically-zero region
        if (!(w.t > 1e-4 * eps0 * eps0)) continue;
        ++done;
        auto act = apply_LA_to_kernel(field, kp, zeta, z);
        rep.min_relative_value = std::min(rep.min_relative_value, act.value / act.scale);
        Matrix Ab = field.block(z);
        Eigen::SelfAdjointEigenSolver<Matrix> e1(Ab / kp.beta - A0b);
        Eigen::SelfAdjointEigenSolver<Matrix> e2(sb * A0b - Ab);
        rep.min_eig_M1 = std::min(rep.min_eig_M1, e1.eigenvalues().minCoeff());
        rep.min_eig_M2 = std::min(rep.min_eig_M2, e2.eigenvalues().minCoeff());
    }
    rep.pass = rep.min_relative_value >= -1e-12 && rep.min_eig_M1 >= -1e-12 &&
               rep.min_eig_M2 >= -1e-12;
    return rep;
}

/// Both sides of a kernel bound, in log space; the caller asserts the
/// inequality direction.
struct LogBoundPair {
    double log_lhs = 0.0;
    double log_rhs = 0.0;
};

/// Upper bound on the lateral shell S1_r = dB_{Kr} x [-b_B r^2, 0]:
/// Gamma(zeta^{-1} o z) <= (b_B r^2)^{-sQ/2} exp(-c1 K^2 / b_B) for
/// zeta in Q3_r, z in S1_r, K >= K1.
inline LogBoundPair bound_upper_shell(const KernelParams& kp, double sigma0, double b_B,
                                      double K, double c1, double r, const Point& z,
                                      const Point& zeta) {
    const BlockStructure& st = kp.structure;
    double br2 = b_B * r * r;
    if (std::abs(norm_B(st, z.x) - K * r) > 1e-9 * K * r || z.t < -br2 - 1e-12 ||
        z.t > 1e-12)
        throw std::invalid_argument("bound_upper_shell: z not on the lateral shell");
    Cylinder Q3 = centered_cylinder(st.N, sigma0 * r, -br2, -0.5 * br2);
    if (!membership(st, Q3, zeta))
        throw std::invalid_argument("bound_upper_shell: zeta not in the mass window");
    LogBoundPair bp;
    bp.log_lhs = log_gamma_translated(kp, zeta, z);
    bp.log_rhs = -0.5 * kp.s * st.Q * std::log(br2) - c1 * K * K / b_B;
    return bp;
}

/// Lower bound on the core Q2_r: Gamma(zeta^{-1} o z) >= (b_B r^2)^{-sQ/2}
/// exp(-c2 / b_B^{2n+1}) for zeta in Q3_r, z in Q2_r.
inline LogBoundPair bound_lower_core(const KernelParams& kp, double sigma0, double b_B,
                                     double c2, double r, const Point& z, const Point& zeta) {
    const BlockStructure& st = kp.structure;
    double br2 = b_B * r * r;
    Cylinder Q2 = centered_cylinder(st.N, sigma0 * r, -0.25 * br2, 0.0);
    Cylinder Q3 = centered_cylinder(st.N, sigma0 * r, -br2, -0.5 * br2);
    if (!membership(st, Q2, z))
        throw std::invalid_argument("bound_lower_core: z not in the core cylinder");
    if (!membership(st, Q3, zeta))
        throw std::invalid_argument("bound_lower_core: zeta not in the mass window");
    LogBoundPair bp;
    bp.log_lhs = log_gamma_translated(kp, zeta, z);
    bp.log_rhs = -0.5 * kp.s * st.Q * std::log(br2) -
                 c2 / std::pow(b_B, 2 * st.n + 1);
    return bp;
}

} // namespace kolmo
