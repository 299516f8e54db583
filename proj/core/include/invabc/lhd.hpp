#pragma once

#include <cstdint>
#include <vector>

namespace invabc {

/// Latin hypercube draw of n points over the box [lo, hi]: every dimension
/// places exactly one point per equal-width stratum, uniformly within it.
std::vector<std::vector<double>> lhd_sample(std::size_t n, const std::vector<double>& lo,
                                            const std::vector<double>& hi, std::uint64_t seed);

} // namespace invabc
