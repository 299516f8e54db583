#pragma once

#include "invabc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace testsupport {

/// Central finite difference of a scalar-valued callable with respect to one
/// storage location, restoring the original value afterwards.
template <class LossFn>
double fd_grad(LossFn&& loss, double* x, double h = 1e-5) {
    const double orig = *x;
    *x = orig + h;
    const double lp = loss();
    *x = orig - h;
    const double lm = loss();
    *x = orig;
    return (lp - lm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

/// Up to k distinct indices of [0, n), deterministic in the seed.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    invabc::Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.index(i + 1)]);
    idx.resize(std::min(n, k));
    return idx;
}

} // namespace testsupport
