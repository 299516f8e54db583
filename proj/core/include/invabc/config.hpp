#pragma once

#include "invabc/abc.hpp"
#include "invabc/forming.hpp"
#include "invabc/lssvr.hpp"
#include "invabc/toml.hpp"
#include "invabc/vae.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace invabc::pipeline {

struct ParamSpec {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    abc::PriorKind prior = abc::PriorKind::Uniform;
    double mean = 0.0;
    double stddev = 1.0;
};

/// Everything one run needs, parsed from a TOML file. Component seeds left
/// out of the file derive from the master seed, so one --seed switch reseeds
/// the whole chain.
struct RunConfig {
    std::vector<ParamSpec> parameters;
    std::uint64_t seed = 0;
    std::size_t grid = 32;
    std::size_t image_size = 64;
    std::size_t train_samples = 200;
    std::size_t test_samples = 50;
    std::string out_dir = "runs/out";

    vae::VaeConfig vae;
    bool vae_seed_explicit = false;

    std::vector<double> bandwidth_factors{0.1, 0.2, 0.5, 1.0, 2.0};
    std::vector<double> gammas{1.0, 1e2, 1e4};
    std::size_t folds = 5;

    abc::NpmcConfig npmc;
    bool abc_seed_explicit = false;

    double ssim_threshold = 0.85;
    std::size_t augment_count = 200;
    std::size_t augment_rounds = 3;
    std::size_t report_draws = 20;

    std::size_t dim() const { return parameters.size(); }
    std::vector<double> lower() const;
    std::vector<double> upper() const;
    std::vector<std::string> names() const;

    sim::SimConfig sim_config() const;
    abc::Prior prior() const;
    /// Bandwidth factors scaled by sqrt(dim), crossed with the gammas.
    lssvr::HyperGrid hyper_grid() const;
};

/// Replaces the master seed and rederives the component seeds that the file
/// did not pin.
void reseed(RunConfig& cfg, std::uint64_t seed);

RunConfig parse_run_config(const toml::Value& root);
RunConfig load_run_config(const std::string& path);

/// Stable key=value rendering of every result-affecting field, hashed into
/// the run manifest.
std::string canonical_text(const RunConfig& cfg);

} // namespace invabc::pipeline
