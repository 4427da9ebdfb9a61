#pragma once

#include <random>

#include "kolmo/block_structure.hpp"
#include "kolmo/types.hpp"

namespace kolmo::testutil {

inline std::mt19937_64 make_gen(std::uint64_t seed = 12345) { return std::mt19937_64(seed); }

inline Vector random_vector(std::mt19937_64& gen, int N, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector x(N);
    for (int i = 0; i < N; ++i) x(i) = u(gen);
    return x;
}

inline Point random_point(std::mt19937_64& gen, int N, double xscale = 1.0, double tscale = 1.0) {
    std::uniform_real_distribution<double> u(-tscale, tscale);
    return Point(random_vector(gen, N, xscale), u(gen));
}

// p = [2,1] with a rank-1 2x1 block; N = 3, Q = 5.
inline BlockStructure structure_p21() {
    Matrix b(2, 1);
    b << 1.0, 0.0;
    return build_structure({2, 1}, {b});
}

// Single-block structure (n = 0): |x|_B is Euclidean, B = 0.
inline BlockStructure structure_single(int p0 = 2) {
    return build_structure({p0}, {});
}

} // namespace kolmo::testutil
