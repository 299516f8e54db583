#include "invabc/rng.hpp"

#include <cmath>

namespace invabc {

double Rng::normal() {
    if (have_normal_) {
        have_normal_ = false;
        return cached_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * f;
    have_normal_ = true;
    return u * f;
}

} // namespace invabc
