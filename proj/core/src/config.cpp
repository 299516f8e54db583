#include "invabc/config.hpp"

#include "invabc/errors.hpp"
#include "invabc/rng.hpp"

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <set>
#include <sstream>

namespace invabc::pipeline {

namespace {

constexpr std::uint64_t kVaeSeedTag = 0x56;
constexpr std::uint64_t kAbcSeedTag = 0x41;

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_keys(const toml::Value& t, std::initializer_list<const char*> allowed,
                const std::string& section) {
    for (const auto& [key, v] : t.as_table()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
}

std::int64_t get_int(const toml::Value& sec, const char* key, std::int64_t dflt) {
    const toml::Value* v = sec.find(key);
    return v == nullptr ? dflt : v->as_int();
}

double get_double(const toml::Value& sec, const char* key, double dflt) {
    const toml::Value* v = sec.find(key);
    return v == nullptr ? dflt : v->as_double();
}

std::size_t to_count(std::int64_t v, const char* what) {
    if (v < 0) throw ConfigError(std::string(what) + " must be nonnegative");
    return static_cast<std::size_t>(v);
}

std::vector<double> get_double_array(const toml::Value& sec, const char* key,
                                     std::vector<double> dflt) {
    const toml::Value* v = sec.find(key);
    if (v == nullptr) return dflt;
    std::vector<double> out;
    for (const toml::Value& e : v->as_array()) out.push_back(e.as_double());
    return out;
}

void require_positive(const std::vector<double>& xs, const char* what) {
    if (xs.empty()) throw ConfigError(std::string(what) + " must not be empty");
    for (double x : xs)
        if (!(std::isfinite(x) && x > 0.0))
            throw ConfigError(std::string(what) + " entries must be positive");
}

bool power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

} // namespace

std::vector<double> RunConfig::lower() const {
    std::vector<double> out;
    for (const auto& p : parameters) out.push_back(p.lo);
    return out;
}

std::vector<double> RunConfig::upper() const {
    std::vector<double> out;
    for (const auto& p : parameters) out.push_back(p.hi);
    return out;
}

std::vector<std::string> RunConfig::names() const {
    std::vector<std::string> out;
    for (const auto& p : parameters) out.push_back(p.name);
    return out;
}

sim::SimConfig RunConfig::sim_config() const {
    sim::SimConfig s;
    s.grid = grid;
    s.lo = lower();
    s.hi = upper();
    return s;
}

abc::Prior RunConfig::prior() const {
    std::vector<abc::PriorDim> dims;
    for (const auto& p : parameters) {
        abc::PriorDim d;
        d.kind = p.prior;
        d.lo = p.lo;
        d.hi = p.hi;
        d.mean = p.mean;
        d.stddev = p.stddev;
        dims.push_back(d);
    }
    return abc::Prior(std::move(dims));
}

lssvr::HyperGrid RunConfig::hyper_grid() const {
    lssvr::HyperGrid g;
    const double scale = std::sqrt(static_cast<double>(dim()));
    for (double f : bandwidth_factors) g.bandwidths.push_back(f * scale);
    g.gammas = gammas;
    return g;
}

void reseed(RunConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    if (!cfg.vae_seed_explicit) cfg.vae.seed = derive_seed(seed, {kVaeSeedTag});
    if (!cfg.abc_seed_explicit) cfg.npmc.seed = derive_seed(seed, {kAbcSeedTag});
}

RunConfig parse_run_config(const toml::Value& root) {
    RunConfig cfg;
    check_keys(root, {"run", "vae", "lssvr", "abc", "validation", "report", "parameter"},
               "config");

    if (const toml::Value* run = root.find("run")) {
        check_keys(*run, {"seed", "grid", "image_size", "train_samples", "test_samples", "out"},
                   "run");
        cfg.seed = static_cast<std::uint64_t>(to_count(get_int(*run, "seed", 0), "run.seed"));
        cfg.grid = to_count(get_int(*run, "grid", 32), "run.grid");
        cfg.image_size = to_count(get_int(*run, "image_size", 64), "run.image_size");
        cfg.train_samples =
            to_count(get_int(*run, "train_samples", 200), "run.train_samples");
        cfg.test_samples = to_count(get_int(*run, "test_samples", 50), "run.test_samples");
        if (const toml::Value* out = run->find("out")) cfg.out_dir = out->as_string();
    }

    if (const toml::Value* v = root.find("vae")) {
        check_keys(*v, {"latent_dim", "epochs", "batch", "lr", "seed"}, "vae");
        cfg.vae.latent_dim = to_count(get_int(*v, "latent_dim", 8), "vae.latent_dim");
        cfg.vae.epochs = to_count(get_int(*v, "epochs", 150), "vae.epochs");
        cfg.vae.batch = to_count(get_int(*v, "batch", 16), "vae.batch");
        cfg.vae.lr = get_double(*v, "lr", 1e-3);
        if (const toml::Value* s = v->find("seed")) {
            cfg.vae.seed = static_cast<std::uint64_t>(to_count(s->as_int(), "vae.seed"));
            cfg.vae_seed_explicit = true;
        }
    }

    if (const toml::Value* l = root.find("lssvr")) {
        check_keys(*l, {"bandwidth_factors", "gammas", "folds"}, "lssvr");
        cfg.bandwidth_factors =
            get_double_array(*l, "bandwidth_factors", cfg.bandwidth_factors);
        cfg.gammas = get_double_array(*l, "gammas", cfg.gammas);
        cfg.folds = to_count(get_int(*l, "folds", 5), "lssvr.folds");
    }

    if (const toml::Value* a = root.find("abc")) {
        check_keys(*a, {"n", "t_max", "quantile", "epsilon_stop", "accept_floor", "pilot", "seed"},
                   "abc");
        cfg.npmc.n = to_count(get_int(*a, "n", 500), "abc.n");
        cfg.npmc.t_max = to_count(get_int(*a, "t_max", 20), "abc.t_max");
        cfg.npmc.quantile = get_double(*a, "quantile", 0.5);
        cfg.npmc.epsilon_stop = get_double(*a, "epsilon_stop", 0.0);
        cfg.npmc.accept_floor = get_double(*a, "accept_floor", 1e-6);
        cfg.npmc.pilot = to_count(get_int(*a, "pilot", 0), "abc.pilot");
        if (const toml::Value* s = a->find("seed")) {
            cfg.npmc.seed = static_cast<std::uint64_t>(to_count(s->as_int(), "abc.seed"));
            cfg.abc_seed_explicit = true;
        }
    }

    if (const toml::Value* v = root.find("validation")) {
        check_keys(*v, {"ssim_threshold", "augment_count", "augment_rounds"}, "validation");
        cfg.ssim_threshold = get_double(*v, "ssim_threshold", 0.85);
        cfg.augment_count =
            to_count(get_int(*v, "augment_count", 200), "validation.augment_count");
        cfg.augment_rounds =
            to_count(get_int(*v, "augment_rounds", 3), "validation.augment_rounds");
    }

    if (const toml::Value* r = root.find("report")) {
        check_keys(*r, {"draws"}, "report");
        cfg.report_draws = to_count(get_int(*r, "draws", 20), "report.draws");
    }

    const toml::Value* params = root.find("parameter");
    if (params == nullptr) throw ConfigError("config needs [[parameter]] entries");
    for (const toml::Value& p : params->as_array()) {
        check_keys(p, {"name", "lo", "hi", "prior", "mean", "stddev"}, "parameter");
        ParamSpec spec;
        spec.name = p.at("name").as_string();
        spec.lo = get_double(p, "lo", 0.0);
        spec.hi = get_double(p, "hi", 1.0);
        if (const toml::Value* kind = p.find("prior")) {
            const std::string& k = kind->as_string();
            if (k == "uniform") {
                spec.prior = abc::PriorKind::Uniform;
            } else if (k == "gaussian") {
                spec.prior = abc::PriorKind::Gaussian;
            } else {
                throw ConfigError("parameter '" + spec.name + "': unknown prior '" + k + "'");
            }
        }
        if (spec.prior == abc::PriorKind::Gaussian) {
            if (!p.contains("mean") || !p.contains("stddev"))
                throw ConfigError("parameter '" + spec.name +
                                  "': gaussian prior needs mean and stddev");
            spec.mean = p.at("mean").as_double();
            spec.stddev = p.at("stddev").as_double();
        }
        cfg.parameters.push_back(std::move(spec));
    }

    reseed(cfg, cfg.seed);

    if (cfg.parameters.size() < 6)
        throw ConfigError("the simulator needs at least six parameters, got " +
                          std::to_string(cfg.parameters.size()));
    std::set<std::string> seen;
    for (const auto& p : cfg.parameters) {
        if (p.name.empty()) throw ConfigError("parameter names must not be empty");
        for (char c : p.name) {
            bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
            if (!ok)
                throw ConfigError("parameter '" + p.name + "': names are limited to [A-Za-z0-9_.-]");
        }
        if (!seen.insert(p.name).second)
            throw ConfigError("duplicate parameter name '" + p.name + "'");
        if (!(std::isfinite(p.lo) && std::isfinite(p.hi) && p.lo < p.hi))
            throw ConfigError("parameter '" + p.name + "': needs lo < hi");
        if (p.prior == abc::PriorKind::Gaussian &&
            !(std::isfinite(p.mean) && std::isfinite(p.stddev) && p.stddev > 0.0))
            throw ConfigError("parameter '" + p.name + "': gaussian prior needs stddev > 0");
    }
    if (cfg.grid < 2) throw ConfigError("run.grid must be at least 2");
    if (!power_of_two(cfg.image_size) || cfg.image_size < 8)
        throw ConfigError("run.image_size must be a power of two, at least 8");
    if (cfg.test_samples == 0) throw ConfigError("run.test_samples must be positive");
    if (cfg.folds < 2) throw ConfigError("lssvr.folds must be at least 2");
    if (cfg.train_samples < cfg.folds)
        throw ConfigError("run.train_samples must be at least lssvr.folds");
    if (cfg.vae.latent_dim == 0) throw ConfigError("vae.latent_dim must be positive");
    if (cfg.vae.epochs == 0) throw ConfigError("vae.epochs must be positive");
    if (cfg.vae.batch == 0) throw ConfigError("vae.batch must be positive");
    if (!(std::isfinite(cfg.vae.lr) && cfg.vae.lr > 0.0))
        throw ConfigError("vae.lr must be positive");
    require_positive(cfg.bandwidth_factors, "lssvr.bandwidth_factors");
    require_positive(cfg.gammas, "lssvr.gammas");
    if (cfg.npmc.n < 2) throw ConfigError("abc.n must be at least 2");
    if (cfg.npmc.t_max == 0) throw ConfigError("abc.t_max must be positive");
    if (!(cfg.npmc.quantile > 0.0 && cfg.npmc.quantile <= 1.0))
        throw ConfigError("abc.quantile must be in (0, 1]");
    if (!(std::isfinite(cfg.npmc.epsilon_stop) && cfg.npmc.epsilon_stop >= 0.0))
        throw ConfigError("abc.epsilon_stop must be nonnegative");
    if (!(cfg.npmc.accept_floor > 0.0 && cfg.npmc.accept_floor <= 1.0))
        throw ConfigError("abc.accept_floor must be in (0, 1]");
    if (!(cfg.ssim_threshold > 0.0 && cfg.ssim_threshold < 1.0))
        throw ConfigError("validation.ssim_threshold must be in (0, 1)");
    if (cfg.augment_count == 0) throw ConfigError("validation.augment_count must be positive");
    if (cfg.report_draws == 0) throw ConfigError("report.draws must be positive");
    if (cfg.out_dir.empty()) throw ConfigError("run.out must not be empty");

    cfg.vae.image_h = cfg.image_size;
    cfg.vae.image_w = cfg.image_size;
    cfg.vae.channels = 3;

    cfg.prior();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(toml::parse_file(path));
}

std::string canonical_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "run.seed=" << cfg.seed << '\n';
    out << "run.grid=" << cfg.grid << '\n';
    out << "run.image_size=" << cfg.image_size << '\n';
    out << "run.train_samples=" << cfg.train_samples << '\n';
    out << "run.test_samples=" << cfg.test_samples << '\n';
    for (std::size_t i = 0; i < cfg.parameters.size(); ++i) {
        const ParamSpec& p = cfg.parameters[i];
        const std::string prefix = "param." + std::to_string(i) + ".";
        out << prefix << "name=" << p.name << '\n';
        out << prefix << "lo=" << g17(p.lo) << '\n';
        out << prefix << "hi=" << g17(p.hi) << '\n';
        out << prefix << "prior=" << (p.prior == abc::PriorKind::Uniform ? "uniform" : "gaussian")
            << '\n';
        if (p.prior == abc::PriorKind::Gaussian) {
            out << prefix << "mean=" << g17(p.mean) << '\n';
            out << prefix << "stddev=" << g17(p.stddev) << '\n';
        }
    }
    out << "vae.latent_dim=" << cfg.vae.latent_dim << '\n';
    out << "vae.epochs=" << cfg.vae.epochs << '\n';
    out << "vae.batch=" << cfg.vae.batch << '\n';
    out << "vae.lr=" << g17(cfg.vae.lr) << '\n';
    out << "vae.beta1=" << g17(cfg.vae.beta1) << '\n';
    out << "vae.beta2=" << g17(cfg.vae.beta2) << '\n';
    out << "vae.eps_adam=" << g17(cfg.vae.eps_adam) << '\n';
    out << "vae.lrelu_lambda=" << g17(cfg.vae.lrelu_lambda) << '\n';
    out << "vae.seed=" << cfg.vae.seed << '\n';
    out << "lssvr.bandwidth_factors=";
    for (std::size_t i = 0; i < cfg.bandwidth_factors.size(); ++i)
        out << (i ? "," : "") << g17(cfg.bandwidth_factors[i]);
    out << '\n';
    out << "lssvr.gammas=";
    for (std::size_t i = 0; i < cfg.gammas.size(); ++i) out << (i ? "," : "") << g17(cfg.gammas[i]);
    out << '\n';
    out << "lssvr.folds=" << cfg.folds << '\n';
    out << "abc.n=" << cfg.npmc.n << '\n';
    out << "abc.t_max=" << cfg.npmc.t_max << '\n';
    out << "abc.quantile=" << g17(cfg.npmc.quantile) << '\n';
    out << "abc.epsilon_stop=" << g17(cfg.npmc.epsilon_stop) << '\n';
    out << "abc.accept_floor=" << g17(cfg.npmc.accept_floor) << '\n';
    out << "abc.pilot=" << cfg.npmc.pilot << '\n';
    out << "abc.seed=" << cfg.npmc.seed << '\n';
    out << "validation.ssim_threshold=" << g17(cfg.ssim_threshold) << '\n';
    out << "validation.augment_count=" << cfg.augment_count << '\n';
    out << "validation.augment_rounds=" << cfg.augment_rounds << '\n';
    out << "report.draws=" << cfg.report_draws << '\n';
    return out.str();
}

} // namespace invabc::pipeline
