#pragma once

#include <map>
#include <string>

namespace invabc::pipeline {

/// ISO 8601 UTC, second resolution.
std::string now_utc();

struct StageRecord {
    /// Logical inputs ("<config>") and relative file paths, each with a
    /// sha256 digest.
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    /// Small result scalars worth keeping (hyperparameter choice, SSIM mean).
    std::map<std::string, std::string> notes;
    /// Informational only; never consulted by the skip logic.
    std::string completed_at;
};

/// JSON ledger of a run directory: which stage ran, with which input and
/// output digests. Stages consult it to skip work that is already current.
class Manifest {
public:
    Manifest() = default;

    /// Reads dir/manifest.json when present, else starts empty.
    static Manifest open(const std::string& dir);

    void set_run_info(const std::string& config_hash, const std::string& sim_config_hash,
                      const std::string& tool);
    const std::string& config_hash() const { return config_hash_; }
    const std::string& sim_config_hash() const { return sim_config_hash_; }
    const std::string& tool() const { return tool_; }

    const StageRecord* stage(const std::string& name) const;
    void put_stage(const std::string& name, StageRecord rec);
    void drop_stage(const std::string& name);

    int augment_round() const { return augment_round_; }
    void set_augment_round(int round) { augment_round_ = round; }

    std::string path() const;
    void save() const;

private:
    std::string dir_;
    std::string config_hash_;
    std::string sim_config_hash_;
    std::string tool_;
    mutable std::string created_at_;
    int augment_round_ = 0;
    std::map<std::string, StageRecord> stages_;
};

} // namespace invabc::pipeline
