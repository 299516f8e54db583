#include "invabc/lhd.hpp"

#include "invabc/errors.hpp"
#include "invabc/rng.hpp"

#include <numeric>

namespace invabc {

std::vector<std::vector<double>> lhd_sample(std::size_t n, const std::vector<double>& lo,
                                            const std::vector<double>& hi, std::uint64_t seed) {
    if (n == 0) throw ConfigError("lhd: sample count must be positive");
    if (lo.size() != hi.size() || lo.empty())
        throw ConfigError("lhd: bounds must be nonempty and of equal length");
    const std::size_t d = lo.size();
    for (std::size_t j = 0; j < d; ++j)
        if (!(lo[j] < hi[j]))
            throw ConfigError("lhd: bounds must satisfy lo < hi in every dimension");

    Rng rng(seed);
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
        const double span = hi[j] - lo[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform();
            out[i][j] = lo[j] + span * (static_cast<double>(perm[i]) + u) / static_cast<double>(n);
        }
    }
    return out;
}

} // namespace invabc
