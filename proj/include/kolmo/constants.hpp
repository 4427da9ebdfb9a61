#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kolmo/potentials.hpp"

namespace kolmo {

/// Kernel exponent/spread choice per hypothesis: H1 takes (s, beta) =
/// (Lambda/lambda, lambda) (valid only under the eigenvalue-ratio bound);
/// H2 takes s = 1 + s0, beta = 2/(2+s0) with s0 = 1/Q.
struct KernelChoice {
    double s = 1.0;
    double beta = 1.0;
    double s0 = std::numeric_limits<double>::quiet_NaN();  // H2 only
};

inline KernelChoice kernel_choice(Hypothesis hyp, double lambda, double Lambda, int Q) {
    if (!(lambda > 0.0) || lambda > Lambda)
        throw std::invalid_argument("kernel_choice: need 0 < lambda <= Lambda");
    KernelChoice kc;
    if (hyp == Hypothesis::H1) {
        if (!(Lambda / lambda < 1.0 + 2.0 / Q))
            throw std::invalid_argument("kernel_choice: H1 requires Lambda/lambda < 1 + 2/Q");
        kc.s = Lambda / lambda;
        kc.beta = lambda;
    } else {
        kc.s0 = 1.0 / Q;
        kc.s = 1.0 + kc.s0;
        kc.beta = 2.0 / (2.0 + kc.s0);
    }
    return kc;
}

/// Shell-bound constants: K1 = max{8 sigma_bar, 2 sigma_bar sqrt(b_B Lambda1 beta s Q)}
/// and c1 = 1/(8 Lambda1 sigma_bar^2 beta).
struct UpperBoundConstants {
    double K1 = 0.0;
    double c1 = 0.0;
};

inline UpperBoundConstants upper_bound_constants(const EigenBounds& eb, double s_exp,
                                                 double beta, double sigma_bar, double b_B,
                                                 int Q) {
    UpperBoundConstants ub;
    ub.K1 = std::max(8.0 * sigma_bar,
                     2.0 * sigma_bar * std::sqrt(b_B * eb.Lambda1 * beta * s_exp * Q));
    ub.c1 = 1.0 / (8.0 * eb.Lambda1 * sigma_bar * sigma_bar * beta);
    return ub;
}

/// Core-bound constant: c2 = (5/(2 lambda1 beta)) 4^{2n+1}.
inline double lower_bound_constant(const EigenBounds& eb, double beta, int n) {
    return 5.0 / (2.0 * eb.lambda1 * beta) * std::pow(4.0, 2 * n + 1);
}

/// K with a deterministic 1e-6 relative margin above the strict bound
/// K^2 > max{c2/(c1 b_B^{2n}), K1^2}.
inline double choose_K(double c1, double c2, double K1, double b_B, int n) {
    double need = std::max(c2 / (c1 * std::pow(b_B, 2 * n)), K1 * K1);
    return (1.0 + 1e-6) * std::sqrt(need);
}

/**
 * The full structural-constant chain. Constants beyond the growth factor
 * are astronomically extreme (eta ~ exp(-mu_lower) with mu_lower ~ 1e6 for
 * the prototype), so each one is carried both as a double (which may
 * under/overflow) and as its natural log; invariants are evaluated on the
 * log representation.
 */
struct ConstantsReport {
    std::string hypothesis;
    int N = 0, n = 0, Q = 0;
    double lambda = 0.0, Lambda = 0.0;
    bool near_h1_threshold = false;

    double sigma0 = 0.0, sigma_bar = 0.0, sigma_star = 0.0, b_B = 0.0;
    double lambda_I = 0.0, Lambda_I = 0.0, lambda1 = 0.0, Lambda1 = 0.0;
    double s = 0.0, beta = 0.0;
    double s0 = std::numeric_limits<double>::quiet_NaN();

    double c1 = 0.0, c2 = 0.0, K1 = 0.0, K = 0.0;
    double mu_upper = 0.0, mu_lower = 0.0;
    double C_strip = 0.0;
    double B1_measure = 0.0, B1_std_error = 0.0, Q3_1_measure = 0.0;
    double C1 = 0.0, C2 = 0.0;

    double eta_bar = 0.0, log_eta_bar = 0.0;
    double eta = 0.0, log_eta = 0.0;
    double theta = 0.0;
    double P = 1.0, log_P_minus_1 = 0.0;
    double alpha = 0.0, log_alpha = 0.0;

    double M_growth = 0.0;
    double m_steps = 0.0, log_m = 0.0;
    double delta = 0.0, log_delta = 0.0;
    double eps0_case = 0.0, log_eps0_case = 0.0;
    double C_hat = 0.0, log_C_hat = 0.0;
    double c_hat = 0.0, log_c_hat = 0.0;
    double C_harnack = 0.0, log_C_harnack = 0.0;

    double eps0_H2 = std::numeric_limits<double>::quiet_NaN();
    double r0 = std::numeric_limits<double>::quiet_NaN();
};

struct AssemblyOptions {
    std::uint64_t seed = kDefaultSeed;
    long mc_samples = 1L << 21;
    std::optional<double> eps0_H2;  // from the H2 subsolution certificate
};

/// Growth-factor block: log eta_bar = -mu_lower + log(1 - e^{-(mu_upper-mu_lower)})
/// - log(C_strip b_B^{sQ/2}); eta = eta_bar |Q3_1|.
inline void assemble_growth_block(ConstantsReport& r) {
    if (!(r.mu_upper > r.mu_lower))
        throw std::runtime_error("constants: exponent ordering mu_upper > mu_lower failed");
    double gap = r.mu_upper - r.mu_lower;
    r.log_eta_bar = -r.mu_lower + std::log1p(-std::exp(-gap)) - std::log(r.C_strip) -
                    0.5 * r.s * r.Q * std::log(r.b_B);
    r.eta_bar = std::exp(r.log_eta_bar);
    r.log_eta = r.log_eta_bar + std::log(r.Q3_1_measure);
    r.eta = std::exp(r.log_eta);

    r.theta = r.K / r.sigma0;
    if (!(r.theta >= 2.0))
        throw std::runtime_error("constants: theta < 2 signals an inconsistent upstream constant");
    r.P = 1.0 + 0.25 * r.eta;
    r.log_P_minus_1 = r.log_eta - std::log(4.0);
    double lt = std::log(r.theta);
    if (r.eta > 1e-8) {
        r.alpha = std::log(r.P) / lt;
        r.log_alpha = std::log(r.alpha);
    } else {
        r.log_alpha = r.log_P_minus_1 - std::log(lt);
        r.alpha = std::exp(r.log_alpha);
    }
}

/// Measure-to-point block: m is the smallest natural number with
/// (1+eta/2)^m > M; delta = (1/2) C1^{Q+2} |Q3_1| / (2m)^{(n+1/2)(Q+2)}.
inline void assemble_measure_block(ConstantsReport& r, double M) {
    if (!(M > 1.0)) throw std::invalid_argument("constants: need M > 1");
    r.M_growth = M;
    double lnM = std::log(M);
    double half_eta_log = r.log_eta - std::log(2.0);
    if (half_eta_log > std::log(1e-8)) {
        double L = std::log1p(0.5 * r.eta);
        double m = std::floor(lnM / L) + 1.0;
        r.m_steps = m;
        r.log_m = std::log(m);
    } else {
        // ln(1+eta/2) == eta/2 at this magnitude
        r.log_m = std::log(lnM) - half_eta_log;
        r.m_steps = std::exp(r.log_m);  // typically +inf
    }
    double nh = r.n + 0.5;
    r.log_delta = std::log(0.5) + (r.Q + 2) * std::log(r.C1) + std::log(r.Q3_1_measure) -
                  nh * (r.Q + 2) * (std::log(2.0) + r.log_m);
    r.delta = std::exp(r.log_delta);
}

/// Harnack block: eps0 = (C2/2^{n+1/2})^{Q+2} delta, C_hat = eta eps0/|Q3_1|,
/// c_hat = C_hat 2^{-(n+1/2)(Q+2)}, C = 2 max{(1+C_hat)/C_hat, (1+c_hat)/c_hat}.
inline void assemble_harnack_block(ConstantsReport& r) {
    double nh = r.n + 0.5;
    r.log_eps0_case = (r.Q + 2) * (std::log(r.C2) - nh * std::log(2.0)) + r.log_delta;
    r.eps0_case = std::exp(r.log_eps0_case);
    r.log_C_hat = r.log_eta + r.log_eps0_case - std::log(r.Q3_1_measure);
    r.C_hat = std::exp(r.log_C_hat);
    r.log_c_hat = r.log_C_hat - nh * (r.Q + 2) * std::log(2.0);
    r.c_hat = std::exp(r.log_c_hat);
    // (1+x)/x is decreasing, so the max comes from the smaller of the two.
    double x = std::min(r.log_C_hat, r.log_c_hat);
    r.log_C_harnack = std::log(2.0) + std::log1p(std::exp(std::min(x, 700.0))) - x;
    r.C_harnack = std::exp(r.log_C_harnack);
}

/// r0 = (eps0/K) min{1, 4^{n+1/2}/(C1 C2)} for the small-radius H2 estimate.
inline double h2_radius(const ConstantsReport& r, double eps0_H2) {
    if (!(eps0_H2 > 0.0) || !(eps0_H2 < 1.0))
        throw std::invalid_argument("h2_radius: eps0 must lie in (0,1)");
    double cap = std::pow(4.0, r.n + 0.5) / (r.C1 * r.C2);
    return eps0_H2 / r.K * std::min(1.0, cap);
}

inline ConstantsReport assemble_constants(const BlockStructure& st, Hypothesis hyp,
                                          double lambda, double Lambda,
                                          const AssemblyOptions& opts = {}) {
    ConstantsReport r;
    r.hypothesis = hyp == Hypothesis::H1 ? "H1" : "H2";
    r.N = st.N;
    r.n = st.n;
    r.Q = st.Q;
    r.lambda = lambda;
    r.Lambda = Lambda;
    r.near_h1_threshold = Lambda / lambda >= (1.0 + 2.0 / st.Q) - 1e-3;

    auto [sigma0, sigma_bar] = sigma_bounds(st, opts.seed);
    r.sigma0 = sigma0;
    r.sigma_bar = sigma_bar;
    r.sigma_star = matrix_E_norm_horizon(st);
    r.b_B = compute_b_B(st, sigma0, sigma_bar);

    auto cp = covariance_poly(st, matrix_I0(st));
    auto eb = eigen_bounds(st, cp, lambda, Lambda, sigma0, sigma_bar, r.b_B);
    r.lambda_I = eb.lambda_I;
    r.Lambda_I = eb.Lambda_I;
    r.lambda1 = eb.lambda1;
    r.Lambda1 = eb.Lambda1;

    auto kc = kernel_choice(hyp, lambda, Lambda, st.Q);
    r.s = kc.s;
    r.beta = kc.beta;
    r.s0 = kc.s0;

    auto ub = upper_bound_constants(eb, r.s, r.beta, sigma_bar, r.b_B, st.Q);
    r.K1 = ub.K1;
    r.c1 = ub.c1;
    r.c2 = lower_bound_constant(eb, r.beta, st.n);
    r.K = choose_K(r.c1, r.c2, r.K1, r.b_B, st.n);
    r.mu_upper = r.c1 * r.K * r.K / r.b_B;
    r.mu_lower = r.c2 / std::pow(r.b_B, 2 * st.n + 1);

    // Strip constant with the worst-case window T2-T1 = b_B. H1 evaluates the
    // Gaussian factor exactly (A0 = I0); H2 inflates it by Lambda^{N/2} to
    // cover every admissible A0 = A(z0).
    {
        KernelParams kp = make_kernel(st, r.s, r.beta, matrix_I0(st));
        double C = strip_bound(kp, 0.0, r.b_B);
        if (hyp == Hypothesis::H2) C *= std::pow(Lambda, 0.5 * st.N);
        r.C_strip = C;
    }

    auto mb = unit_ball_measure(st, opts.seed, opts.mc_samples);
    r.B1_measure = mb.value;
    r.B1_std_error = mb.std_error;
    r.Q3_1_measure = mb.value * std::pow(sigma0, st.Q) * (0.5 * r.b_B);

    auto ic = inclusion_constants(st, sigma0, sigma_bar, r.b_B, r.K);
    r.C1 = ic.C1;
    r.C2 = ic.C2;

    assemble_growth_block(r);
    assemble_measure_block(r, std::pow(2.0, 1.0 + (st.n + 0.5) * (st.Q + 2)));
    assemble_harnack_block(r);

    if (opts.eps0_H2) {
        r.eps0_H2 = *opts.eps0_H2;
        r.r0 = h2_radius(r, r.eps0_H2);
    }
    return r;
}

/// Post-assembly re-verification of every invariant the chain promises.
/// Returns human-readable violations; empty means the report is sound.
inline std::vector<std::string> report_invariant_violations(const BlockStructure& st,
                                                            const ConstantsReport& r) {
    std::vector<std::string> v;
    auto require = [&](bool ok, const std::string& what) {
        if (!ok) v.push_back(what);
    };
    require(r.sigma0 > 0 && r.sigma_bar >= r.sigma0, "sigma bounds ordered and positive");
    require(r.b_B > 0 && r.b_B <= std::pow(r.sigma0 / r.sigma_bar, 2) + 1e-15,
            "b_B within its defining cap");
    bool norm_ok = true;
    for (int k = 0; k <= 128; ++k) {
        double sig = r.b_B * (2.0 * k / 128.0 - 1.0);
        if (matrix_E(st, sig).operatorNorm() > 2.0 + 1e-12) norm_ok = false;
    }
    require(norm_ok, "||E(sigma)|| <= 2 on |sigma| <= b_B");
    require(r.lambda1 > 0 && r.Lambda1 >= r.lambda1, "eigenvalue bounds ordered");
    require(r.c1 > 0 && r.c2 > 0, "bound constants positive");
    require(r.K > r.K1 && r.K > r.sigma0, "K above K1 and sigma0");
    require(r.K * r.K > r.c2 / (r.c1 * std::pow(r.b_B, 2 * st.n)),
            "K^2 strictly above c2/(c1 b_B^{2n})");
    require(r.mu_upper > r.mu_lower, "mu_upper > mu_lower");
    require(r.C_strip > 0 && std::isfinite(r.C_strip), "strip constant finite");
    require(std::isfinite(r.log_eta) && r.log_eta < 0, "eta positive (log finite)");
    require(r.theta >= 2.0, "theta >= 2");
    require(std::isfinite(r.log_P_minus_1), "P > 1 (log finite)");
    require(std::isfinite(r.log_alpha), "alpha > 0 (log finite)");
    require(std::isfinite(r.log_delta), "delta > 0 (log finite)");
    require(std::isfinite(r.log_C_harnack) && r.log_C_harnack >= std::log(2.0) - 1e-12,
            "C_harnack >= 2");
    require(r.C1 > 0 && r.C2 > 0, "inclusion constants positive");
    require(r.B1_measure > 0 && r.Q3_1_measure > 0, "measures positive");
    return v;
}

} // namespace kolmo
