#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>

#include "kolmo/covariance.hpp"
#include "kolmo/geometry.hpp"

namespace kolmo {

enum class Hypothesis { H1, H2 };

enum class FieldKind { constant, checkerboard, smooth_oscillatory, piecewise_random };

/**
 * Variable diffusion coefficient A(z) = diag(AA(z), 0) with AA(z) a p0 x p0
 * symmetric matrix, lambda I <= AA(z) <= Lambda I everywhere. The evaluator
 * is pure and deterministic; `modulus`, when present, bounds the oscillation
 * of AA over group cylinders Q_eps^{-eps^2,eps^2}(z0) by omega(eps).
 */
struct CoefficientField {
    std::function<Matrix(const Point&)> evaluator;
    double lambda = 1.0;
    double Lambda = 1.0;
    FieldKind kind = FieldKind::constant;
    std::function<double(double)> modulus;  // empty when no uniform modulus

    Matrix block(const Point& z) const { return evaluator(z); }
    Matrix full(const BlockStructure& s, const Point& z) const {
        return embed_diffusion_block(s, evaluator(z));
    }
    bool has_modulus() const { return static_cast<bool>(modulus); }
};

struct FieldParams {
    double lambda = 1.0;
    double Lambda = 1.2;
    Matrix A00;             // constant kind; defaults to midpoint * I
    double cell = 0.5;      // cell scale of checkerboard / piecewise-random
    double time_freq = 1.0; // smooth-oscillatory temporal frequency
    Vector wave;            // smooth-oscillatory wave vector on the diffusive block
    double amplitude = -1.0; // < 0 selects 0.9 * (Lambda-lambda)/2
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Cell id of z in the group-adapted partition: quantize time into slabs of
// height cell^2, transport x to the slab base time along the drift flow
// (eta = E(-(t - t_j)) x), then quantize block i of eta at scale cell^{2i+1}.
// Cell boundaries are flow lines of the group within each slab, so the
// discontinuity set respects the cylinder geometry.
inline std::uint64_t cell_id(const BlockStructure& s, double cell, std::uint64_t seed,
                             const Point& z) {
    double slab = cell * cell;
    double j = std::floor(z.t / slab);
    Vector eta = matrix_E(s, -(z.t - j * slab)) * z.x;
    std::uint64_t h = splitmix64(seed);
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(j)));
    for (int i = 0; i <= s.n; ++i) {
        double w = BlockStructure::block_weight(cell, i);
        for (int k = 0; k < s.p[static_cast<size_t>(i)]; ++k) {
            double q = std::floor(eta(s.offsets[static_cast<size_t>(i)] + k) / w);
            h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(q)));
        }
    }
    return h;
}

// Random symmetric matrix with unit spectral norm, deterministic under seed.
inline Matrix random_unit_symmetric(int p, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix S(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) S(i, j) = S(j, i) = gauss(gen);
    double nrm = S.operatorNorm();
    if (nrm < 1e-12) return Matrix::Identity(p, p);
    return S / nrm;
}

// Random symmetric matrix with spectrum drawn uniformly from [lambda, Lambda].
inline Matrix random_spd_in_band(int p, double lambda, double Lambda, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> band(lambda, Lambda);
    Matrix G(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) G(i, j) = gauss(gen);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ();
    Vector d(p);
    for (int i = 0; i < p; ++i) d(i) = band(gen);
    return Q * d.asDiagonal() * Q.transpose();
}

// Project the spectrum of a symmetric matrix onto [lambda, Lambda]; the
// eigenvalue clamp is 1-Lipschitz, so moduli of continuity survive it.
inline Matrix clamp_spectrum(const Matrix& S, double lambda, double Lambda) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    Vector d = es.eigenvalues();
    for (int i = 0; i < d.size(); ++i) d(i) = std::min(Lambda, std::max(lambda, d(i)));
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace detail

inline CoefficientField make_field(const BlockStructure& s, FieldKind kind, Hypothesis hyp,
                                   FieldParams params, std::uint64_t seed = kDefaultSeed) {
    if (!(params.lambda > 0.0) || params.lambda > params.Lambda)
        throw std::invalid_argument("make_field: need 0 < lambda <= Lambda");
    double h1_cap = 1.0 + 2.0 / s.Q;
    if (hyp == Hypothesis::H1 && !(params.Lambda / params.lambda < h1_cap))
        throw std::invalid_argument("make_field: H1 requires Lambda/lambda < 1 + 2/Q");

    const int p0 = s.p[0];
    CoefficientField f;
    f.lambda = params.lambda;
    f.Lambda = params.Lambda;
    f.kind = kind;

    switch (kind) {
        case FieldKind::constant: {
            Matrix A00 = params.A00.size() > 0
                             ? params.A00
                             : Matrix(0.5 * (params.lambda + params.Lambda) *
                                      Matrix::Identity(p0, p0));
            Eigen::SelfAdjointEigenSolver<Matrix> es(A00);
            if (es.eigenvalues().minCoeff() < params.lambda - 1e-12 ||
                es.eigenvalues().maxCoeff() > params.Lambda + 1e-12)
                throw std::invalid_argument("make_field: constant block outside [lambda,Lambda]");
            f.evaluator = [A00](const Point&) { return A00; };
            f.modulus = [](double) { return 0.0; };
            break;
        }
        case FieldKind::checkerboard: {
            if (hyp == Hypothesis::H2)
                throw std::invalid_argument("make_field: checkerboard has no modulus (H1 only)");
            double lo = params.lambda, hi = params.Lambda, cell = params.cell;
            BlockStructure sc = s;
            std::uint64_t sd = seed;
            f.evaluator = [sc, cell, sd, lo, hi, p0](const Point& z) {
                bool odd = detail::cell_id(sc, cell, sd, z) & 1ULL;
                return Matrix((odd ? hi : lo) * Matrix::Identity(p0, p0));
            };
            break;
        }
        case FieldKind::smooth_oscillatory: {
            double amp = params.amplitude >= 0.0 ? params.amplitude
                                                 : 0.45 * (params.Lambda - params.lambda);
            if (amp > 0.5 * (params.Lambda - params.lambda) + 1e-12)
                throw std::invalid_argument("make_field: amplitude exceeds the ellipticity band");
            double mid = 0.5 * (params.lambda + params.Lambda);
            double w1 = params.time_freq;
            Vector k0 = params.wave.size() == p0 ? params.wave : Vector(Vector::Zero(p0));
            if (params.wave.size() > 0 && params.wave.size() != p0)
                throw std::invalid_argument("make_field: wave vector must live on the p0 block");
            Matrix S = detail::random_unit_symmetric(p0, detail::splitmix64(seed));
            double lo = params.lambda, hi = params.Lambda;
            BlockStructure sc = s;
            f.evaluator = [sc, mid, amp, w1, k0, S, lo, hi, p0](const Point& z) {
                double phase = w1 * z.t + k0.dot(z.x.head(p0));
                Matrix A = mid * Matrix::Identity(p0, p0) + amp * std::sin(phase) * S;
                return detail::clamp_spectrum(A, lo, hi);
            };
            // On Q_eps^{-eps^2,eps^2}(z0): |t - t0| <= eps^2 and the p0-block
            // of x - x0 is the p0-block of xi, so |x^(0) - x0^(0)| <= eps.
            double L_t = amp * std::abs(w1);
            double L_x = amp * k0.norm();
            double band = params.Lambda - params.lambda;
            f.modulus = [L_t, L_x, band](double eps) {
                return std::min(band, L_t * eps * eps + L_x * eps);
            };
            break;
        }
        case FieldKind::piecewise_random: {
            if (hyp == Hypothesis::H2)
                throw std::invalid_argument("make_field: piecewise-random has no modulus (H1 only)");
            double lo = params.lambda, hi = params.Lambda, cell = params.cell;
            BlockStructure sc = s;
            std::uint64_t sd = seed;
            f.evaluator = [sc, cell, sd, lo, hi, p0](const Point& z) {
                return detail::random_spd_in_band(p0, lo, hi,
                                                  detail::cell_id(sc, cell, sd, z));
            };
            break;
        }
    }
    return f;
}

/// Sampling report of validate_field; report-only, never throws on violations.
struct FieldReport {
    double min_eig = 0.0;
    double max_eig = 0.0;
    double empirical_ratio = 1.0;
    double max_symmetry_violation = 0.0;
    double max_modulus_violation = 0.0;  // 0 when no modulus present
    long samples = 0;
};

inline FieldReport validate_field(const BlockStructure& s, const CoefficientField& f,
                                  const Cylinder& region, long samples, std::mt19937_64& gen) {
    FieldReport rep;
    rep.samples = samples;
    rep.min_eig = std::numeric_limits<double>::infinity();
    rep.max_eig = -rep.min_eig;
    for (long k = 0; k < samples; ++k) {
        Point z = sample_in_cylinder(s, region, gen);
        Matrix A = f.block(z);
        rep.max_symmetry_violation =
            std::max(rep.max_symmetry_violation, (A - A.transpose()).norm());
        Eigen::SelfAdjointEigenSolver<Matrix> es(A);
        rep.min_eig = std::min(rep.min_eig, es.eigenvalues().minCoeff());
        rep.max_eig = std::max(rep.max_eig, es.eigenvalues().maxCoeff());
    }
    rep.empirical_ratio = rep.max_eig / rep.min_eig;

    if (f.has_modulus()) {
        std::uniform_real_distribution<double> ueps(0.05, 0.95);
        long pairs = std::max(32L, samples / 16);
        for (long k = 0; k < pairs; ++k) {
            Point z0 = sample_in_cylinder(s, region, gen);
            double eps = ueps(gen);
            Matrix A0 = f.block(z0);
            Cylinder around{z0, eps, -eps * eps, eps * eps};
            for (int j = 0; j < 16; ++j) {
                Point z = sample_in_cylinder(s, around, gen);
                double osc = (f.block(z) - A0).operatorNorm();
                rep.max_modulus_violation =
                    std::max(rep.max_modulus_violation, osc - f.modulus(eps));
            }
        }
    }
    return rep;
}

} // namespace kolmo
