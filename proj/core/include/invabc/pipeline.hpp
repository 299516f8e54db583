#pragma once

#include "invabc/config.hpp"
#include "invabc/errors.hpp"
#include "invabc/manifest.hpp"

#include <string>
#include <vector>

namespace invabc::pipeline {

/// A stage's upstream file is absent; the message names the stage that
/// produces it.
struct MissingArtifactError : Error {
    using Error::Error;
};

inline constexpr const char* kToolVersion = "invabc 0.1.0";

struct StageOutcome {
    bool skipped = false;
    /// True when validate emitted a fresh augmentation design this call.
    bool augmented = false;
    /// 0 success; 2 validation gate failed.
    int exit_code = 0;
    std::string message;
};

/// Sampled parameter vectors keyed by a numeric id that names the per-row
/// simulation outputs.
struct DesignTable {
    std::vector<double> ids;
    std::vector<std::vector<double>> thetas;
};

/// Base train design plus every augmentation file, in round order.
DesignTable load_train_design(const RunConfig& cfg);
DesignTable load_test_design(const RunConfig& cfg);

StageOutcome run_design(const RunConfig& cfg);
StageOutcome run_simulate(const RunConfig& cfg);
StageOutcome run_build_objective(const RunConfig& cfg);
StageOutcome run_train_vae(const RunConfig& cfg);
StageOutcome run_fit_surrogate(const RunConfig& cfg);
StageOutcome run_validate(const RunConfig& cfg);
StageOutcome run_infer(const RunConfig& cfg);
StageOutcome run_report(const RunConfig& cfg);

const std::vector<std::string>& stage_names();
/// Dispatch by CLI name ("design", "build-objective", ...).
StageOutcome run_stage(const std::string& name, const RunConfig& cfg);

/// Runs the whole chain, looping the train/fit/validate block while the
/// SSIM gate fails and augmentation designs keep being emitted. Returns the
/// failing validate outcome when the loop gives up.
StageOutcome run_full(const RunConfig& cfg);

} // namespace invabc::pipeline
