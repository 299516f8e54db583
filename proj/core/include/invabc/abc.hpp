#pragma once

#include "invabc/rng.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace invabc::abc {

enum class PriorKind : int { Uniform = 0, Gaussian = 1 };

/// One prior dimension. Gaussian is truncated to [lo, hi].
struct PriorDim {
    PriorKind kind = PriorKind::Uniform;
    double lo = 0.0;
    double hi = 1.0;
    double mean = 0.0;
    double stddev = 1.0;
};

class Prior {
public:
    explicit Prior(std::vector<PriorDim> dims);

    std::size_t dim() const { return dims_.size(); }
    const std::vector<PriorDim>& dims() const { return dims_; }

    bool in_support(const std::vector<double>& theta) const;
    /// Joint density; zero outside the box.
    double density(const std::vector<double>& theta) const;
    std::vector<double> sample(Rng& rng) const;

private:
    std::vector<PriorDim> dims_;
    std::vector<double> norm_;
};

struct Particle {
    std::vector<double> theta;
    double weight = 0.0;
    double distance = 0.0;
};

struct ParticlePool {
    std::size_t generation = 0;
    std::vector<Particle> particles;
    std::vector<double> sigma;
    double epsilon = std::numeric_limits<double>::infinity();
    std::size_t proposals = 0;
};

struct PosteriorSummary {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<Particle> particles;
    std::vector<double> epsilon_trace;
    std::vector<double> acceptance_trace;
    std::size_t generations = 0;
};

struct NpmcConfig {
    std::size_t n = 500;
    std::size_t t_max = 20;
    double quantile = 0.5;
    double epsilon_stop = 0.0;
    double accept_floor = 1e-6;
    std::size_t pilot = 0; // 0: use n
    std::uint64_t seed = 0;
};

/// Deterministic surrogate; must be safe to call from several threads at once.
using Forward = std::function<std::vector<double>(const std::vector<double>&)>;

double distance(const std::vector<double>& zo, const std::vector<double>& zhat);

/// Draws until n particles satisfy distance <= epsilon; uniform weights 1/n.
/// Particle slot i uses the random stream derived from (seed, phase, i), so
/// results do not depend on thread scheduling.
ParticlePool rejection_sample(const Prior& prior, const Forward& forward,
                              const std::vector<double>& zo, double epsilon, std::size_t n,
                              std::uint64_t seed, std::uint64_t phase = 1,
                              double accept_floor = 1e-6);

/// Unnormalized PMC weight of theta against the previous generation.
double pmc_weight(const ParticlePool& prev, const std::vector<double>& theta, const Prior& prior);

/// Per-dimension sqrt(2 * weighted population variance), floored at
/// 1e-12*(hi-lo)^2 variance so a degenerate pool still perturbs.
std::vector<double> kernel_scale(const std::vector<Particle>& particles, const Prior& prior);

/// One PMC generation: ancestors picked by weight, perturbed with the
/// previous kernel scale, redrawn wholesale when the proposal leaves the
/// prior support or misses the tolerance.
ParticlePool pmc_iterate(const ParticlePool& prev, const Prior& prior, const Forward& forward,
                         const std::vector<double>& zo, double epsilon, std::size_t n,
                         std::uint64_t seed, double accept_floor = 1e-6);

/// Linear-interpolation q-quantile of the accepted distances.
double adapt_tolerance(std::vector<double> distances, double q);

PosteriorSummary summarize(const std::vector<Particle>& particles);

/// Pilot prior-predictive sample fixes epsilon_1 as its q-quantile, then
/// rejection seeds generation 1 and PMC generations follow with the
/// quantile-adapted tolerance until t_max, epsilon < epsilon_stop, or the
/// relative epsilon improvement drops to 1% or less.
PosteriorSummary run_npmc(const Prior& prior, const Forward& forward,
                          const std::vector<double>& zo, const NpmcConfig& cfg);

} // namespace invabc::abc
