#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kolmo/types.hpp"

namespace kolmo {

/**
 * Block structure of the drift matrix B.
 *
 * B is N x N, upper block-triangular with nonzero superdiagonal blocks
 * B_1 ... B_n, where B_j has shape p_{j-1} x p_j and full column rank.
 * A spatial vector decomposes as x = (x^(0), ..., x^(n)) with block i of
 * dimension p_i; block i carries dilation weight r^{2i+1}.
 */
struct BlockStructure {
    std::vector<int> p;          // block sizes, non-increasing, positive
    std::vector<Matrix> blocks;  // superdiagonal blocks B_1 ... B_n
    int N = 0;                   // total spatial dimension
    int n = 0;                   // number of superdiagonal blocks
    int Q = 0;                   // homogeneous dimension minus 2
    double M_B = 0.0;            // max_j ||B_j^T|| (spectral norm)
    double c_nB = 0.0;           // constant in the (E(t)-I) homogeneous-norm bound
    Matrix B;                    // assembled N x N drift matrix
    std::vector<int> offsets;    // start index of block i within R^N

    /// i-th block of a spatial vector.
    Eigen::VectorBlock<const Vector> block_of(const Vector& x, int i) const {
        return x.segment(offsets[static_cast<size_t>(i)], p[static_cast<size_t>(i)]);
    }

    /// Dilation weight r^{2i+1} of block i.
    static double block_weight(double r, int i) {
        return std::pow(r, 2 * i + 1);
    }
};

/// Validates the block data and assembles the derived quantities.
/// Throws std::invalid_argument on empty p, shape mismatch, non-monotone
/// sizes, or a rank-deficient block.
inline BlockStructure build_structure(std::vector<int> p, std::vector<Matrix> blocks) {
    if (p.empty()) throw std::invalid_argument("build_structure: empty block-size list");
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 1) throw std::invalid_argument("build_structure: block sizes must be >= 1");
        if (i > 0 && p[i] > p[i - 1])
            throw std::invalid_argument("build_structure: block sizes must be non-increasing");
    }
    if (blocks.size() != p.size() - 1)
        throw std::invalid_argument("build_structure: expected " + std::to_string(p.size() - 1) +
                                    " superdiagonal blocks, got " + std::to_string(blocks.size()));

    BlockStructure s;
    s.p = std::move(p);
    s.blocks = std::move(blocks);
    s.n = static_cast<int>(s.p.size()) - 1;

    s.offsets.resize(s.p.size());
    int off = 0;
    for (size_t i = 0; i < s.p.size(); ++i) {
        s.offsets[i] = off;
        off += s.p[i];
    }
    s.N = off;

    s.Q = 0;
    for (size_t i = 0; i < s.p.size(); ++i) s.Q += (2 * static_cast<int>(i) + 1) * s.p[i];

    for (int j = 1; j <= s.n; ++j) {
        const Matrix& Bj = s.blocks[static_cast<size_t>(j - 1)];
        if (Bj.rows() != s.p[static_cast<size_t>(j - 1)] || Bj.cols() != s.p[static_cast<size_t>(j)])
            throw std::invalid_argument("build_structure: block " + std::to_string(j) +
                                        " has wrong shape");
        Eigen::JacobiSVD<Matrix> svd(Bj);
        const auto& sv = svd.singularValues();
        double smax = sv(0);
        double smin = sv(sv.size() - 1);
        if (!(smin > 1e-10 * std::max(1.0, smax)))
            throw std::invalid_argument("build_structure: block " + std::to_string(j) +
                                        " is rank-deficient");
        s.M_B = std::max(s.M_B, smax);  // ||B_j^T|| = ||B_j||
    }

    if (s.n == 0) {
        s.c_nB = 0.0;
    } else {
        double e1 = std::pow(s.M_B, 1.0 / (2 * s.n + 1));
        double e2 = std::pow(s.M_B, static_cast<double>(s.n) / (2 * s.n + 1));
        s.c_nB = 0.5 * s.n * (s.n + 1) * std::max(e1, e2);
    }

    s.B = Matrix::Zero(s.N, s.N);
    for (int j = 1; j <= s.n; ++j) {
        s.B.block(s.offsets[static_cast<size_t>(j - 1)], s.offsets[static_cast<size_t>(j)],
                  s.p[static_cast<size_t>(j - 1)], s.p[static_cast<size_t>(j)]) =
            s.blocks[static_cast<size_t>(j - 1)];
    }
    return s;
}

/// The 2x2 prototype: p = [1,1], B_1 = [1]. N = 2, Q = 4.
inline BlockStructure prototype_structure() {
    Matrix b(1, 1);
    b(0, 0) = 1.0;
    return build_structure({1, 1}, {b});
}

} // namespace kolmo
