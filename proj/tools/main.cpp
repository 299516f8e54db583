#include "invabc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

void apply_thread_cap() {
    const char* env = std::getenv("INVABC_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n <= 0)
        throw invabc::ConfigError("INVABC_THREADS must be a positive integer, got '" +
                                  std::string(env) + "'");
#ifdef _OPENMP
    omp_set_num_threads(static_cast<int>(n));
#endif
}

const std::map<std::string, std::string>& stage_help() {
    static const std::map<std::string, std::string> help{
        {"design", "sample Latin hypercube train and test designs"},
        {"simulate", "run the forming model on every design row"},
        {"build-objective", "compose the objective image from the training set"},
        {"train-vae", "train the summary autoencoder and encode all images"},
        {"fit-surrogate", "cross-validate and fit the latent-space regressor"},
        {"validate", "check surrogate image fidelity against the test set"},
        {"infer", "run ABC population Monte Carlo against the objective"},
        {"report", "write posterior summaries, plots and defect counts"},
        {"run", "run every stage in order, looping on validation failures"},
    };
    return help;
}

} // namespace

int main(int argc, char** argv) {
    using namespace invabc;

    CLI::App app{"likelihood-free inverse identification of forming parameters"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string chosen;

    std::vector<std::string> commands = pipeline::stage_names();
    commands.push_back("run");
    std::map<std::string, CLI::App*> subs;
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name, stage_help().at(name));
        sub->add_option("--config", config_path, "run configuration (TOML)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--out", out_dir, "override the output directory");
        sub->callback([&chosen, name] { chosen = name; });
        subs[name] = sub;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        apply_thread_cap();
        pipeline::RunConfig cfg = pipeline::load_run_config(config_path);
        if (subs.at(chosen)->count("--seed") > 0) pipeline::reseed(cfg, seed);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        const pipeline::StageOutcome out =
            chosen == "run" ? pipeline::run_full(cfg) : pipeline::run_stage(chosen, cfg);
        if (!out.message.empty()) std::cout << out.message << '\n';
        return out.exit_code;
    } catch (const pipeline::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
