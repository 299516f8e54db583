#include "invabc/manifest.hpp"

#include "invabc/errors.hpp"

#include <json.hpp>

#include <ctime>
#include <fstream>

namespace invabc::pipeline {

std::string now_utc() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

using nlohmann::json;

std::map<std::string, std::string> read_map(const json& j, const char* key) {
    std::map<std::string, std::string> out;
    if (!j.contains(key)) return out;
    for (const auto& [k, v] : j.at(key).items()) out[k] = v.get<std::string>();
    return out;
}

} // namespace

Manifest Manifest::open(const std::string& dir) {
    Manifest m;
    m.dir_ = dir;
    std::ifstream in(m.path(), std::ios::binary);
    if (!in) return m;
    json j;
    try {
        in >> j;
        m.config_hash_ = j.value("config_hash", "");
        m.sim_config_hash_ = j.value("sim_config_hash", "");
        m.tool_ = j.value("tool", "");
        m.created_at_ = j.value("created_at", "");
        m.augment_round_ = j.value("augment_round", 0);
        if (j.contains("stages")) {
            for (const auto& [name, rec] : j.at("stages").items()) {
                StageRecord r;
                r.inputs = read_map(rec, "inputs");
                r.outputs = read_map(rec, "outputs");
                r.notes = read_map(rec, "notes");
                r.completed_at = rec.value("completed_at", "");
                m.stages_[name] = std::move(r);
            }
        }
    } catch (const json::exception& e) {
        throw IoError("manifest parse failed in " + m.path() + ": " + e.what());
    }
    return m;
}

void Manifest::set_run_info(const std::string& config_hash, const std::string& sim_config_hash,
                            const std::string& tool) {
    config_hash_ = config_hash;
    sim_config_hash_ = sim_config_hash;
    tool_ = tool;
}

const StageRecord* Manifest::stage(const std::string& name) const {
    auto it = stages_.find(name);
    return it == stages_.end() ? nullptr : &it->second;
}

void Manifest::put_stage(const std::string& name, StageRecord rec) {
    stages_[name] = std::move(rec);
}

void Manifest::drop_stage(const std::string& name) { stages_.erase(name); }

std::string Manifest::path() const { return dir_ + "/manifest.json"; }

void Manifest::save() const {
    json j;
    j["config_hash"] = config_hash_;
    j["sim_config_hash"] = sim_config_hash_;
    j["tool"] = tool_;
    if (created_at_.empty()) created_at_ = now_utc();
    j["created_at"] = created_at_;
    j["updated_at"] = now_utc();
    j["augment_round"] = augment_round_;
    json stages = json::object();
    for (const auto& [name, rec] : stages_) {
        json r;
        r["inputs"] = rec.inputs;
        r["outputs"] = rec.outputs;
        r["notes"] = rec.notes;
        r["completed_at"] = rec.completed_at;
        stages[name] = std::move(r);
    }
    j["stages"] = std::move(stages);

    std::ofstream out(path(), std::ios::binary);
    if (!out) throw IoError("cannot write " + path());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write error on " + path());
}

} // namespace invabc::pipeline
