#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace isorient {

using Vec3 = Eigen::Vector3d;
using Vec3List = std::vector<Vec3, Eigen::aligned_allocator<Vec3>>;
using Index = std::int64_t;

// Bad or missing input: unreadable files, parse failures, violated preconditions.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical breakdown inside the solver or an assembly invariant violation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Dot product with a fixed blocked summation order, so the result does not
// depend on how many workers participate.
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    constexpr std::size_t kBlock = 4096;
    const std::size_t n = a.size();
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(nblocks); ++blk) {
        const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
        const std::size_t hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
        partial[static_cast<std::size_t>(blk)] = s;
    }
    // pairwise reduction over block sums
    while (partial.size() > 1) {
        std::vector<double> next((partial.size() + 1) / 2);
        for (std::size_t i = 0; i < next.size(); ++i) {
            const std::size_t j = 2 * i;
            next[i] = partial[j] + (j + 1 < partial.size() ? partial[j + 1] : 0.0);
        }
        partial.swap(next);
    }
    return partial.empty() ? 0.0 : partial[0];
}

inline double norm2(const std::vector<double>& a) { return dot(a, a); }

}  // namespace isorient
