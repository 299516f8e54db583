#include "invabc/abc.hpp"

#include "invabc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <numeric>
#include <sstream>
#include <string>

namespace invabc::abc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

double normal_pdf(double x, double mean, double stddev) {
    const double z = (x - mean) / stddev;
    return kInvSqrt2Pi / stddev * std::exp(-0.5 * z * z);
}

void check_theta_dim(const char* who, std::size_t got, std::size_t want) {
    if (got != want) {
        std::ostringstream msg;
        msg << who << ": theta has " << got << " dims, prior has " << want;
        throw ShapeError(msg.str());
    }
}

std::size_t try_budget(double accept_floor) {
    if (!(accept_floor > 0.0) || accept_floor > 1.0)
        throw ConfigError("acceptance floor must be in (0, 1]");
    return static_cast<std::size_t>(std::ceil(1.0 / accept_floor));
}

void rethrow_first(std::vector<std::exception_ptr>& errs) {
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

std::vector<double> cumulative_weights(const ParticlePool& pool) {
    std::vector<double> cum(pool.particles.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pool.particles.size(); ++i) {
        const double w = pool.particles[i].weight;
        if (!(w >= 0.0) || !std::isfinite(w))
            throw NumericError("particle weights must be finite and nonnegative");
        acc += w;
        cum[i] = acc;
    }
    if (!(acc > 0.0)) throw NumericError("particle weights sum to zero");
    return cum;
}

std::size_t pick_ancestor(const std::vector<double>& cum, double u) {
    const double target = u * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    if (it == cum.end()) --it;
    return static_cast<std::size_t>(it - cum.begin());
}

} // namespace

Prior::Prior(std::vector<PriorDim> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw ConfigError("prior needs at least one dimension");
    norm_.resize(dims_.size(), 1.0);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        const PriorDim& p = dims_[d];
        if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo < p.hi)) {
            std::ostringstream msg;
            msg << "prior dim " << d << ": bounds must satisfy lo < hi";
            throw ConfigError(msg.str());
        }
        if (p.kind == PriorKind::Gaussian) {
            if (!std::isfinite(p.mean) || !std::isfinite(p.stddev) || !(p.stddev > 0.0)) {
                std::ostringstream msg;
                msg << "prior dim " << d << ": gaussian needs finite mean and stddev > 0";
                throw ConfigError(msg.str());
            }
            const double mass = normal_cdf((p.hi - p.mean) / p.stddev) -
                                normal_cdf((p.lo - p.mean) / p.stddev);
            if (!(mass > 1e-12)) {
                std::ostringstream msg;
                msg << "prior dim " << d << ": truncation interval carries no gaussian mass";
                throw ConfigError(msg.str());
            }
            norm_[d] = mass;
        } else {
            norm_[d] = p.hi - p.lo;
        }
    }
}

bool Prior::in_support(const std::vector<double>& theta) const {
    check_theta_dim("prior support", theta.size(), dims_.size());
    for (std::size_t d = 0; d < dims_.size(); ++d)
        if (!(theta[d] >= dims_[d].lo && theta[d] <= dims_[d].hi)) return false;
    return true;
}

double Prior::density(const std::vector<double>& theta) const {
    check_theta_dim("prior density", theta.size(), dims_.size());
    double p = 1.0;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        const PriorDim& pd = dims_[d];
        if (!(theta[d] >= pd.lo && theta[d] <= pd.hi)) return 0.0;
        if (pd.kind == PriorKind::Gaussian)
            p *= normal_pdf(theta[d], pd.mean, pd.stddev) / norm_[d];
        else
            p *= 1.0 / norm_[d];
    }
    return p;
}

std::vector<double> Prior::sample(Rng& rng) const {
    std::vector<double> theta(dims_.size());
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        const PriorDim& pd = dims_[d];
        if (pd.kind == PriorKind::Gaussian) {
            bool ok = false;
            for (std::size_t tries = 0; tries < 1000000; ++tries) {
                const double x = rng.normal(pd.mean, pd.stddev);
                if (x >= pd.lo && x <= pd.hi) {
                    theta[d] = x;
                    ok = true;
                    break;
                }
            }
            if (!ok) {
                std::ostringstream msg;
                msg << "prior dim " << d << ": truncated gaussian rejection stalled";
                throw NumericError(msg.str());
            }
        } else {
            theta[d] = rng.uniform(pd.lo, pd.hi);
        }
    }
    return theta;
}

double distance(const std::vector<double>& zo, const std::vector<double>& zhat) {
    if (zo.size() != zhat.size()) {
        std::ostringstream msg;
        msg << "distance: summaries have " << zo.size() << " and " << zhat.size() << " entries";
        throw ShapeError(msg.str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < zo.size(); ++i) {
        const double diff = zo[i] - zhat[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

ParticlePool rejection_sample(const Prior& prior, const Forward& forward,
                              const std::vector<double>& zo, double epsilon, std::size_t n,
                              std::uint64_t seed, std::uint64_t phase, double accept_floor) {
    if (n == 0) throw ConfigError("rejection sampling needs n >= 1");
    if (std::isnan(epsilon) || epsilon < 0.0)
        throw ConfigError("tolerance must be nonnegative");
    const std::size_t budget = try_budget(accept_floor);

    ParticlePool pool;
    pool.generation = static_cast<std::size_t>(phase);
    pool.epsilon = epsilon;
    pool.particles.resize(n);
    std::vector<std::size_t> tries(n, 0);
    std::vector<std::exception_ptr> errs(n);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t slot = 0; slot < n; ++slot) {
        try {
            Rng rng(derive_seed(seed, {phase, slot}));
            bool accepted = false;
            for (std::size_t k = 0; k < budget && !accepted; ++k) {
                std::vector<double> theta = prior.sample(rng);
                const double d = distance(zo, forward(theta));
                ++tries[slot];
                if (d <= epsilon) {
                    pool.particles[slot] = {std::move(theta), 1.0 / static_cast<double>(n), d};
                    accepted = true;
                }
            }
            if (!accepted) {
                std::ostringstream msg;
                msg << "rejection sampling stalled: slot " << slot << " made " << budget
                    << " proposals at tolerance " << epsilon
                    << " without an acceptance (floor " << accept_floor << ")";
                throw NumericError(msg.str());
            }
        } catch (...) {
            errs[slot] = std::current_exception();
        }
    }
    rethrow_first(errs);

    for (std::size_t slot = 0; slot < n; ++slot) pool.proposals += tries[slot];
    pool.sigma = kernel_scale(pool.particles, prior);
    return pool;
}

double pmc_weight(const ParticlePool& prev, const std::vector<double>& theta, const Prior& prior) {
    if (prev.particles.empty()) throw ConfigError("pmc weight needs a previous generation");
    const std::size_t dim = prior.dim();
    check_theta_dim("pmc weight", theta.size(), dim);
    if (prev.sigma.size() != dim)
        throw ShapeError("pmc weight: kernel scale dimension mismatch");

    double denom = 0.0;
    for (const Particle& anc : prev.particles) {
        check_theta_dim("pmc weight", anc.theta.size(), dim);
        double q = anc.weight;
        for (std::size_t d = 0; d < dim; ++d)
            q *= normal_pdf(theta[d], anc.theta[d], prev.sigma[d]);
        denom += q;
    }
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        std::ostringstream msg;
        msg << "pmc weight: proposal density degenerate (" << denom << ")";
        throw NumericError(msg.str());
    }
    return prior.density(theta) / denom;
}

std::vector<double> kernel_scale(const std::vector<Particle>& particles, const Prior& prior) {
    if (particles.empty()) throw ConfigError("kernel scale needs at least one particle");
    const std::size_t dim = prior.dim();
    double wsum = 0.0;
    for (const Particle& p : particles) {
        check_theta_dim("kernel scale", p.theta.size(), dim);
        if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
            throw NumericError("kernel scale: weights must be finite and nonnegative");
        wsum += p.weight;
    }
    if (!(wsum > 0.0)) throw NumericError("kernel scale: weights sum to zero");

    std::vector<double> sigma(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const Particle& p : particles) mean += p.weight * p.theta[d];
        mean /= wsum;
        double var = 0.0;
        for (const Particle& p : particles) {
            const double diff = p.theta[d] - mean;
            var += p.weight * diff * diff;
        }
        var /= wsum;
        const double span = prior.dims()[d].hi - prior.dims()[d].lo;
        var = std::max(var, 1e-12 * span * span);
        sigma[d] = std::sqrt(2.0 * var);
    }
    return sigma;
}

ParticlePool pmc_iterate(const ParticlePool& prev, const Prior& prior, const Forward& forward,
                         const std::vector<double>& zo, double epsilon, std::size_t n,
                         std::uint64_t seed, double accept_floor) {
    if (n == 0) throw ConfigError("pmc iteration needs n >= 1");
    if (std::isnan(epsilon) || epsilon < 0.0)
        throw ConfigError("tolerance must be nonnegative");
    if (epsilon > prev.epsilon)
        throw ConfigError("tolerance must not increase between generations");
    if (prev.sigma.size() != prior.dim())
        throw ShapeError("pmc iteration: kernel scale dimension mismatch");
    const std::size_t budget = try_budget(accept_floor);
    const std::vector<double> cum = cumulative_weights(prev);
    const std::uint64_t phase = static_cast<std::uint64_t>(prev.generation) + 1;
    const std::size_t dim = prior.dim();

    ParticlePool pool;
    pool.generation = prev.generation + 1;
    pool.epsilon = epsilon;
    pool.particles.resize(n);
    std::vector<double> raw_w(n, 0.0);
    std::vector<std::size_t> tries(n, 0);
    std::vector<std::exception_ptr> errs(n);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t slot = 0; slot < n; ++slot) {
        try {
            Rng rng(derive_seed(seed, {phase, slot}));
            std::vector<double> theta(dim);
            bool accepted = false;
            for (std::size_t k = 0; k < budget && !accepted; ++k) {
                const Particle& anc = prev.particles[pick_ancestor(cum, rng.uniform())];
                for (std::size_t d = 0; d < dim; ++d)
                    theta[d] = anc.theta[d] + prev.sigma[d] * rng.normal();
                ++tries[slot];
                if (!prior.in_support(theta)) continue;
                const double d = distance(zo, forward(theta));
                if (d <= epsilon) {
                    raw_w[slot] = pmc_weight(prev, theta, prior);
                    pool.particles[slot] = {theta, 0.0, d};
                    accepted = true;
                }
            }
            if (!accepted) {
                std::ostringstream msg;
                msg << "pmc generation " << pool.generation << " stalled: slot " << slot
                    << " made " << budget << " proposals at tolerance " << epsilon
                    << " without an acceptance (floor " << accept_floor << ")";
                throw NumericError(msg.str());
            }
        } catch (...) {
            errs[slot] = std::current_exception();
        }
    }
    rethrow_first(errs);

    double wsum = 0.0;
    for (std::size_t slot = 0; slot < n; ++slot) {
        pool.proposals += tries[slot];
        wsum += raw_w[slot];
    }
    if (!(wsum > 0.0) || !std::isfinite(wsum))
        throw NumericError("pmc iteration: weight normalization degenerate");
    for (std::size_t slot = 0; slot < n; ++slot)
        pool.particles[slot].weight = raw_w[slot] / wsum;

    pool.sigma = kernel_scale(pool.particles, prior);
    return pool;
}

double adapt_tolerance(std::vector<double> distances, double q) {
    if (distances.empty()) throw ConfigError("tolerance adaptation needs distances");
    if (!(q > 0.0) || q > 1.0) throw ConfigError("quantile level must be in (0, 1]");
    for (double d : distances)
        if (!std::isfinite(d)) throw NumericError("tolerance adaptation: non-finite distance");
    std::sort(distances.begin(), distances.end());
    const std::size_t n = distances.size();
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= n) return distances[n - 1];
    const double frac = pos - static_cast<double>(i0);
    return distances[i0] + frac * (distances[i0 + 1] - distances[i0]);
}

PosteriorSummary summarize(const std::vector<Particle>& particles) {
    if (particles.empty()) throw ConfigError("posterior summary needs particles");
    const std::size_t dim = particles.front().theta.size();
    double wsum = 0.0;
    for (const Particle& p : particles) {
        check_theta_dim("posterior summary", p.theta.size(), dim);
        wsum += p.weight;
    }
    if (!(wsum > 0.0) || !std::isfinite(wsum))
        throw NumericError("posterior summary: weights sum to zero");

    PosteriorSummary out;
    out.mean.resize(dim);
    out.stddev.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const Particle& p : particles) mean += p.weight * p.theta[d];
        mean /= wsum;
        double var = 0.0;
        for (const Particle& p : particles) {
            const double diff = p.theta[d] - mean;
            var += p.weight * diff * diff;
        }
        var /= wsum;
        out.mean[d] = mean;
        out.stddev[d] = std::sqrt(var);
    }
    out.particles = particles;
    return out;
}

PosteriorSummary run_npmc(const Prior& prior, const Forward& forward,
                          const std::vector<double>& zo, const NpmcConfig& cfg) {
    if (cfg.n == 0) throw ConfigError("npmc needs n >= 1");
    if (cfg.t_max == 0) throw ConfigError("npmc needs t_max >= 1");
    if (!(cfg.quantile > 0.0) || cfg.quantile > 1.0)
        throw ConfigError("quantile level must be in (0, 1]");
    if (std::isnan(cfg.epsilon_stop) || cfg.epsilon_stop < 0.0)
        throw ConfigError("epsilon_stop must be nonnegative");
    const std::size_t pilot = cfg.pilot == 0 ? cfg.n : cfg.pilot;

    std::vector<double> pilot_d(pilot, 0.0);
    std::vector<std::exception_ptr> errs(pilot);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t slot = 0; slot < pilot; ++slot) {
        try {
            Rng rng(derive_seed(cfg.seed, {0, slot}));
            pilot_d[slot] = distance(zo, forward(prior.sample(rng)));
        } catch (...) {
            errs[slot] = std::current_exception();
        }
    }
    rethrow_first(errs);

    const double eps1 = adapt_tolerance(pilot_d, cfg.quantile);
    ParticlePool pool;
    try {
        pool = rejection_sample(prior, forward, zo, eps1, cfg.n, cfg.seed, 1, cfg.accept_floor);
    } catch (const NumericError& e) {
        throw NumericError("generation 1: " + std::string(e.what()));
    }

    std::vector<double> eps_trace{eps1};
    std::vector<double> acc_trace{static_cast<double>(cfg.n) / static_cast<double>(pool.proposals)};

    for (std::size_t t = 2; t <= cfg.t_max; ++t) {
        std::vector<double> dists(pool.particles.size());
        for (std::size_t i = 0; i < dists.size(); ++i) dists[i] = pool.particles[i].distance;
        const double eps_next = adapt_tolerance(dists, cfg.quantile);
        if (eps_next < cfg.epsilon_stop) break;
        if (pool.epsilon - eps_next <= 0.01 * pool.epsilon) break;
        try {
            pool = pmc_iterate(pool, prior, forward, zo, eps_next, cfg.n, cfg.seed,
                               cfg.accept_floor);
        } catch (const NumericError& e) {
            throw NumericError("generation " + std::to_string(t) + ": " + std::string(e.what()));
        }
        eps_trace.push_back(eps_next);
        acc_trace.push_back(static_cast<double>(cfg.n) / static_cast<double>(pool.proposals));
    }

    PosteriorSummary out = summarize(pool.particles);
    out.epsilon_trace = std::move(eps_trace);
    out.acceptance_trace = std::move(acc_trace);
    out.generations = pool.generation;
    return out;
}

} // namespace invabc::abc
