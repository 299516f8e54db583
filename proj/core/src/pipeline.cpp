#include "invabc/pipeline.hpp"

#include "invabc/checkpoint.hpp"
#include "invabc/csv.hpp"
#include "invabc/digest.hpp"
#include "invabc/image.hpp"
#include "invabc/lhd.hpp"
#include "invabc/lssvr.hpp"
#include "invabc/rng.hpp"
#include "invabc/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace invabc::pipeline {

namespace {

namespace fs = std::filesystem;

constexpr const char* kDesignTrain = "design_train.csv";
constexpr const char* kDesignTest = "design_test.csv";
constexpr const char* kCanonConfig = "canonical_config.txt";
constexpr const char* kCanonSim = "canonical_sim.txt";
constexpr const char* kObjective = "objective.png";
constexpr const char* kCoverage = "coverage.csv";
constexpr const char* kCheckpoint = "vae/checkpoint.bin";
constexpr const char* kZTrain = "vae/z_train.csv";
constexpr const char* kZObjective = "vae/z_objective.csv";
constexpr const char* kTrainLog = "vae/train_log.csv";
constexpr const char* kChoice = "surrogate/choice.csv";
constexpr const char* kSsimTable = "validate/ssim.csv";
constexpr const char* kValidateSummary = "validate/summary.csv";
constexpr const char* kParticles = "posterior/particles.csv";
constexpr const char* kPosteriorSummary = "posterior/summary.csv";
constexpr const char* kTrace = "posterior/trace.csv";

constexpr std::uint64_t kDesignSeedTag = 0x44;
constexpr std::uint64_t kReportSeedTag = 0x50;

const std::array<const char*, 4> kBundleFiles = {"surrogate/meta.csv", "surrogate/bounds.csv",
                                                 "surrogate/anchors.csv",
                                                 "surrogate/weights.csv"};

using Digests = std::map<std::string, std::string>;

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

fs::path apath(const RunConfig& cfg, const std::string& rel) {
    return fs::path(cfg.out_dir) / rel;
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write error on " + p.string());
}

std::string sim_rel(const char* prefix, std::size_t id, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "sim/%s_%05zu%s", prefix, id, suffix);
    return buf;
}

std::string augment_rel(int round) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "design_augment_%03d.csv", round);
    return buf;
}

struct StageCtx {
    std::string config_hash;
    std::string sim_hash;
    Manifest manifest;
};

StageCtx make_ctx(const RunConfig& cfg) {
    ensure_dir(fs::path(cfg.out_dir));
    StageCtx ctx;
    ctx.config_hash = sha256_hex(canonical_text(cfg));
    ctx.sim_hash = sha256_hex(sim::canonical_text(cfg.sim_config()));
    ctx.manifest = Manifest::open(cfg.out_dir);
    ctx.manifest.set_run_info(ctx.config_hash, ctx.sim_hash, kToolVersion);
    return ctx;
}

Digests base_inputs(const StageCtx& ctx) {
    return {{"<config>", ctx.config_hash}, {"<sim-config>", ctx.sim_hash}};
}

void add_file(Digests& d, const RunConfig& cfg, const std::string& rel) {
    d[rel] = sha256_file(apath(cfg, rel).string());
}

void require_file(const RunConfig& cfg, const std::string& rel, const char* producer) {
    if (!fs::exists(apath(cfg, rel)))
        throw MissingArtifactError("missing " + rel + "; run the '" + std::string(producer) +
                                   "' stage first");
}

bool outputs_current(const RunConfig& cfg, const StageRecord& rec) {
    for (const auto& [rel, digest] : rec.outputs) {
        fs::path p = apath(cfg, rel);
        if (!fs::exists(p) || sha256_file(p.string()) != digest) return false;
    }
    return true;
}

bool stage_current(const StageCtx& ctx, const RunConfig& cfg, const std::string& name,
                   const Digests& inputs) {
    const StageRecord* rec = ctx.manifest.stage(name);
    return rec != nullptr && rec->inputs == inputs && outputs_current(cfg, *rec);
}

StageOutcome skipped_outcome(const std::string& name) {
    StageOutcome o;
    o.skipped = true;
    o.message = name + ": up to date";
    return o;
}

std::vector<std::string> train_design_files(const RunConfig& cfg) {
    std::vector<std::string> files{kDesignTrain};
    for (int round = 1;; ++round) {
        const std::string rel = augment_rel(round);
        if (!fs::exists(apath(cfg, rel))) break;
        files.push_back(rel);
    }
    return files;
}

void append_design(const RunConfig& cfg, const std::string& rel, DesignTable& out) {
    csv::Table t = csv::read(apath(cfg, rel).string());
    const auto names = cfg.names();
    bool header_ok = t.header.size() == names.size() + 1 && t.header[0] == "sample_id";
    for (std::size_t i = 0; header_ok && i < names.size(); ++i)
        header_ok = t.header[i + 1] == names[i];
    if (!header_ok) throw ShapeError(rel + ": design columns do not match the configuration");
    for (const auto& row : t.rows) {
        out.ids.push_back(row[0]);
        out.thetas.emplace_back(row.begin() + 1, row.end());
    }
}

void check_unique_ids(const DesignTable& d, const std::string& what) {
    std::set<double> seen;
    for (double id : d.ids)
        if (!seen.insert(id).second)
            throw ConfigError(what + ": duplicate sample_id " + g17(id));
}

void write_design(const RunConfig& cfg, const std::string& rel, const DesignTable& d) {
    std::vector<std::string> header{"sample_id"};
    for (const auto& n : cfg.names()) header.push_back(n);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
        std::vector<double> row{d.ids[i]};
        row.insert(row.end(), d.thetas[i].begin(), d.thetas[i].end());
        rows.push_back(std::move(row));
    }
    csv::write(apath(cfg, rel).string(), header, rows);
}

std::size_t row_id(double id) { return static_cast<std::size_t>(std::llround(id)); }

nn::Tensor to_tensor(const img::RgbImage& im) {
    nn::Tensor t(1, im.height, im.width, 3);
    for (std::size_t i = 0; i < im.pixels.size(); ++i)
        t.vec()[i] = static_cast<double>(im.pixels[i]) / 255.0;
    return t;
}

img::RgbImage to_image(const nn::Tensor& t) {
    img::RgbImage im;
    im.height = t.h();
    im.width = t.w();
    im.pixels.resize(im.height * im.width * 3);
    for (std::size_t i = 0; i < im.pixels.size(); ++i) {
        double v = std::clamp(t.vec()[i], 0.0, 1.0);
        im.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return im;
}

nn::Tensor load_image_tensor(const RunConfig& cfg, const std::string& rel) {
    img::RgbImage im = img::load_png(apath(cfg, rel).string());
    if (im.height != cfg.image_size || im.width != cfg.image_size)
        throw ShapeError(rel + ": expected " + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size) + " pixels");
    return to_tensor(im);
}

std::string sanitize_name(const std::string& name) {
    std::string out;
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-';
        out += ok ? c : '_';
    }
    return out;
}

std::size_t pick_weighted(const std::vector<double>& cum, double u) {
    const double target = u * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    if (it == cum.end()) --it;
    return static_cast<std::size_t>(it - cum.begin());
}

void finish_stage(StageCtx& ctx, const std::string& name, Digests inputs, Digests outputs,
                  std::map<std::string, std::string> notes) {
    StageRecord rec;
    rec.inputs = std::move(inputs);
    rec.outputs = std::move(outputs);
    rec.notes = std::move(notes);
    rec.completed_at = now_utc();
    ctx.manifest.put_stage(name, std::move(rec));
    ctx.manifest.save();
}

} // namespace

DesignTable load_train_design(const RunConfig& cfg) {
    require_file(cfg, kDesignTrain, "design");
    DesignTable d;
    for (const std::string& rel : train_design_files(cfg)) append_design(cfg, rel, d);
    check_unique_ids(d, "train design");
    return d;
}

DesignTable load_test_design(const RunConfig& cfg) {
    require_file(cfg, kDesignTest, "design");
    DesignTable d;
    append_design(cfg, kDesignTest, d);
    check_unique_ids(d, "test design");
    return d;
}

StageOutcome run_design(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    const Digests inputs = base_inputs(ctx);
    if (stage_current(ctx, cfg, "design", inputs)) return skipped_outcome("design");

    StageOutcome out;
    // A fresh design invalidates augmentation files from any previous
    // configuration; drop them so later stages cannot mix generations.
    for (int round = 1;; ++round) {
        fs::path p = apath(cfg, augment_rel(round));
        if (!fs::exists(p)) break;
        fs::remove(p);
    }
    ctx.manifest.set_augment_round(0);

    const auto lo = cfg.lower();
    const auto hi = cfg.upper();
    const std::uint64_t train_seed = derive_seed(cfg.seed, {kDesignSeedTag, 0});
    const std::uint64_t test_seed = derive_seed(cfg.seed, {kDesignSeedTag, 1});

    DesignTable train;
    train.thetas = lhd_sample(cfg.train_samples, lo, hi, train_seed);
    for (std::size_t i = 0; i < train.thetas.size(); ++i)
        train.ids.push_back(static_cast<double>(i));
    DesignTable test;
    test.thetas = lhd_sample(cfg.test_samples, lo, hi, test_seed);
    for (std::size_t i = 0; i < test.thetas.size(); ++i) test.ids.push_back(static_cast<double>(i));

    write_design(cfg, kDesignTrain, train);
    write_design(cfg, kDesignTest, test);
    write_text(apath(cfg, kCanonConfig), canonical_text(cfg));
    write_text(apath(cfg, kCanonSim), sim::canonical_text(cfg.sim_config()));

    Digests outputs;
    for (const char* rel : {kDesignTrain, kDesignTest, kCanonConfig, kCanonSim})
        add_file(outputs, cfg, rel);
    finish_stage(ctx, "design", inputs, outputs,
                 {{"kind", "lhd"},
                  {"train_seed", std::to_string(train_seed)},
                  {"test_seed", std::to_string(test_seed)}});
    out.message = "design: " + std::to_string(cfg.train_samples) + " train + " +
                  std::to_string(cfg.test_samples) + " test samples";
    return out;
}

StageOutcome run_simulate(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    require_file(cfg, kDesignTrain, "design");
    require_file(cfg, kDesignTest, "design");
    Digests inputs = base_inputs(ctx);
    for (const std::string& rel : train_design_files(cfg)) add_file(inputs, cfg, rel);
    add_file(inputs, cfg, kDesignTest);
    if (stage_current(ctx, cfg, "simulate", inputs)) return skipped_outcome("simulate");

    const DesignTable train = load_train_design(cfg);
    const DesignTable test = load_test_design(cfg);
    ensure_dir(apath(cfg, "sim"));
    const sim::SimConfig sc = cfg.sim_config();

    struct Row {
        const char* prefix;
        std::size_t id;
        const std::vector<double>* theta;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < train.ids.size(); ++i)
        rows.push_back({"train", row_id(train.ids[i]), &train.thetas[i]});
    for (std::size_t i = 0; i < test.ids.size(); ++i)
        rows.push_back({"test", row_id(test.ids[i]), &test.thetas[i]});

    std::vector<std::string> errors(rows.size());
    std::vector<std::array<std::string, 2>> produced(rows.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            const Row& r = rows[i];
            sim::StrainField field = sim::simulate(*r.theta, sc);
            sim::ZoneLabelGrid labels = sim::classify_elements(field, sc.flc);
            img::RgbImage im =
                sim::render_fld_image(labels, sc.colors, cfg.image_size, cfg.image_size, sc.mask);
            const std::string png = sim_rel(r.prefix, r.id, ".png");
            const std::string fld = sim_rel(r.prefix, r.id, "_field.csv");
            img::save_png(im, apath(cfg, png).string());
            sim::write_field_csv(field, apath(cfg, fld).string());
            produced[i] = {png, fld};
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    std::size_t failed = 0;
    for (const auto& e : errors)
        if (!e.empty()) ++failed;
    if (failed > 0) {
        std::ostringstream log;
        log << "prefix,sample_id,error\n";
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (!errors[i].empty())
                log << rows[i].prefix << ',' << rows[i].id << ',' << errors[i] << '\n';
        write_text(apath(cfg, "sim/failures.csv"), log.str());
        throw NumericError("simulate: " + std::to_string(failed) + " of " +
                           std::to_string(rows.size()) + " rows failed; see sim/failures.csv");
    }

    Digests outputs;
    for (const auto& pair : produced)
        for (const auto& rel : pair) add_file(outputs, cfg, rel);
    finish_stage(ctx, "simulate", inputs, outputs, {{"rows", std::to_string(rows.size())}});
    StageOutcome out;
    out.message = "simulate: " + std::to_string(rows.size()) + " rows";
    return out;
}

StageOutcome run_build_objective(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    const DesignTable train = load_train_design(cfg);
    Digests inputs = base_inputs(ctx);
    std::vector<std::string> pngs;
    for (double id : train.ids) {
        const std::string rel = sim_rel("train", row_id(id), ".png");
        require_file(cfg, rel, "simulate");
        pngs.push_back(rel);
        add_file(inputs, cfg, rel);
    }
    if (stage_current(ctx, cfg, "build-objective", inputs))
        return skipped_outcome("build-objective");
    if (pngs.empty()) throw ConfigError("build-objective: the training design is empty");

    std::vector<img::RgbImage> flds;
    flds.reserve(pngs.size());
    for (const std::string& rel : pngs) flds.push_back(img::load_png(apath(cfg, rel).string()));

    const img::HsvBounds green = img::default_green_bounds();
    std::size_t unresolved = 0;
    img::RgbImage objective = img::reconstruct_objective(flds, green, &unresolved);
    img::save_png(objective, apath(cfg, kObjective).string());

    const sim::DiskMask mask = cfg.sim_config().mask;
    std::size_t working = 0, green_px = 0;
    for (std::size_t y = 0; y < objective.height; ++y) {
        const double ny = (static_cast<double>(y) + 0.5) / static_cast<double>(objective.height);
        for (std::size_t x = 0; x < objective.width; ++x) {
            const double nx = (static_cast<double>(x) + 0.5) / static_cast<double>(objective.width);
            if (!mask.contains(nx, ny)) continue;
            ++working;
            const std::uint8_t* p = objective.px(y, x);
            if (img::hsv_in_bounds(img::rgb_to_hsv(p[0], p[1], p[2]), green)) ++green_px;
        }
    }
    const double fraction =
        working == 0 ? 0.0 : static_cast<double>(green_px) / static_cast<double>(working);
    csv::write(apath(cfg, kCoverage).string(),
               {"green_pixels", "working_pixels", "unresolved_pixels", "green_fraction"},
               {{static_cast<double>(green_px), static_cast<double>(working),
                 static_cast<double>(unresolved), fraction}});

    Digests outputs;
    add_file(outputs, cfg, kObjective);
    add_file(outputs, cfg, kCoverage);
    finish_stage(ctx, "build-objective", inputs, outputs, {{"green_fraction", g17(fraction)}});
    StageOutcome out;
    out.message = "build-objective: green fraction " + g17(fraction);
    return out;
}

StageOutcome run_train_vae(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    const DesignTable train = load_train_design(cfg);
    require_file(cfg, kObjective, "build-objective");
    Digests inputs = base_inputs(ctx);
    std::vector<std::string> pngs;
    for (double id : train.ids) {
        const std::string rel = sim_rel("train", row_id(id), ".png");
        require_file(cfg, rel, "simulate");
        pngs.push_back(rel);
        add_file(inputs, cfg, rel);
    }
    add_file(inputs, cfg, kObjective);
    if (stage_current(ctx, cfg, "train-vae", inputs)) return skipped_outcome("train-vae");

    std::vector<nn::Tensor> images;
    images.reserve(pngs.size() + 1);
    for (const std::string& rel : pngs) images.push_back(load_image_tensor(cfg, rel));
    images.push_back(load_image_tensor(cfg, kObjective));

    vae::VaeModel model(cfg.vae);
    vae::TrainResult result = vae::train(model, images, images.size() - 1, cfg.vae);

    ensure_dir(apath(cfg, "vae"));
    vae::save_checkpoint(model, apath(cfg, kCheckpoint).string());

    std::vector<std::string> zheader{"sample_id"};
    for (std::size_t j = 0; j < cfg.vae.latent_dim; ++j)
        zheader.push_back("z" + std::to_string(j + 1));
    std::vector<std::vector<double>> zrows;
    for (std::size_t i = 0; i < train.ids.size(); ++i) {
        std::vector<double> row{train.ids[i]};
        row.insert(row.end(), result.zs[i].begin(), result.zs[i].end());
        zrows.push_back(std::move(row));
    }
    csv::write(apath(cfg, kZTrain).string(), zheader, zrows);
    csv::write(apath(cfg, kZObjective).string(),
               std::vector<std::string>(zheader.begin() + 1, zheader.end()), {result.zo});
    std::vector<std::vector<double>> logrows;
    for (std::size_t e = 0; e < result.log.epoch_loss.size(); ++e)
        logrows.push_back({static_cast<double>(e + 1), result.log.epoch_loss[e]});
    csv::write(apath(cfg, kTrainLog).string(), {"epoch", "loss"}, logrows);

    Digests outputs;
    for (const char* rel : {kCheckpoint, kZTrain, kZObjective, kTrainLog})
        add_file(outputs, cfg, rel);
    const double final_loss =
        result.log.epoch_loss.empty() ? 0.0 : result.log.epoch_loss.back();
    finish_stage(ctx, "train-vae", inputs, outputs,
                 {{"images", std::to_string(images.size())}, {"final_loss", g17(final_loss)}});
    StageOutcome out;
    out.message = "train-vae: " + std::to_string(cfg.vae.epochs) + " epochs, final loss " +
                  g17(final_loss);
    return out;
}

StageOutcome run_fit_surrogate(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    const DesignTable train = load_train_design(cfg);
    require_file(cfg, kZTrain, "train-vae");
    Digests inputs = base_inputs(ctx);
    for (const std::string& rel : train_design_files(cfg)) add_file(inputs, cfg, rel);
    add_file(inputs, cfg, kZTrain);
    if (stage_current(ctx, cfg, "fit-surrogate", inputs)) return skipped_outcome("fit-surrogate");

    csv::Table zt = csv::read(apath(cfg, kZTrain).string());
    if (zt.header.size() != cfg.vae.latent_dim + 1 || zt.header[0] != "sample_id")
        throw ShapeError("z_train.csv: unexpected columns");
    if (zt.rows.size() != train.ids.size())
        throw ShapeError("z_train.csv: row count does not match the training design");
    std::vector<std::vector<double>> targets;
    for (std::size_t i = 0; i < zt.rows.size(); ++i) {
        if (zt.rows[i][0] != train.ids[i])
            throw ShapeError("z_train.csv: sample ids do not match the training design");
        targets.emplace_back(zt.rows[i].begin() + 1, zt.rows[i].end());
    }

    const auto lo = cfg.lower();
    const auto hi = cfg.upper();
    const lssvr::HyperChoice choice =
        lssvr::select_hyperparams(train.thetas, targets, cfg.hyper_grid(), lo, hi, cfg.folds);
    lssvr::KernelSpec kernel;
    kernel.bandwidth = choice.bandwidth;
    lssvr::LvLssvrModel model =
        lssvr::fit_multi(train.thetas, targets, choice.gamma_reg, kernel, lo, hi);

    ensure_dir(apath(cfg, "surrogate"));
    lssvr::save_bundle(model, apath(cfg, "surrogate").string());
    csv::write(apath(cfg, kChoice).string(), {"bandwidth", "gamma_reg", "cv_rmse"},
               {{choice.bandwidth, choice.gamma_reg, choice.cv_rmse}});

    Digests outputs;
    for (const char* rel : kBundleFiles) add_file(outputs, cfg, rel);
    add_file(outputs, cfg, kChoice);
    finish_stage(ctx, "fit-surrogate", inputs, outputs,
                 {{"bandwidth", g17(choice.bandwidth)},
                  {"gamma_reg", g17(choice.gamma_reg)},
                  {"cv_rmse", g17(choice.cv_rmse)}});
    StageOutcome out;
    out.message = "fit-surrogate: bandwidth " + g17(choice.bandwidth) + ", gamma " +
                  g17(choice.gamma_reg) + ", cv rmse " + g17(choice.cv_rmse);
    return out;
}

StageOutcome run_validate(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    const DesignTable test = load_test_design(cfg);
    require_file(cfg, kCheckpoint, "train-vae");
    for (const char* rel : kBundleFiles) require_file(cfg, rel, "fit-surrogate");
    Digests inputs = base_inputs(ctx);
    add_file(inputs, cfg, kDesignTest);
    add_file(inputs, cfg, kCheckpoint);
    for (const char* rel : kBundleFiles) add_file(inputs, cfg, rel);
    std::vector<std::string> pngs;
    for (double id : test.ids) {
        const std::string rel = sim_rel("test", row_id(id), ".png");
        require_file(cfg, rel, "simulate");
        pngs.push_back(rel);
        add_file(inputs, cfg, rel);
    }
    if (stage_current(ctx, cfg, "validate", inputs)) {
        const StageRecord* rec = ctx.manifest.stage("validate");
        auto it = rec->notes.find("passed");
        const bool passed = it != rec->notes.end() && it->second == "1";
        StageOutcome out = skipped_outcome("validate");
        out.exit_code = passed ? 0 : 2;
        if (!passed) out.message = "validate: up to date (gate failed on the last run)";
        return out;
    }
    if (test.ids.empty()) throw ConfigError("validate: the test design is empty");

    vae::VaeModel model = vae::load_checkpoint(apath(cfg, kCheckpoint).string(), cfg.vae);
    const lssvr::LvLssvrModel surrogate = lssvr::load_bundle(apath(cfg, "surrogate").string());

    double sum = 0.0;
    std::vector<std::vector<double>> ssim_rows;
    for (std::size_t i = 0; i < test.ids.size(); ++i) {
        const std::vector<double> zhat = surrogate.predict(test.thetas[i]);
        const img::RgbImage pseudo = to_image(model.decode(zhat));
        const img::RgbImage truth = img::load_png(apath(cfg, pngs[i]).string());
        const double s = img::ssim(pseudo, truth);
        ssim_rows.push_back({test.ids[i], s});
        sum += s;
    }
    const double mean = sum / static_cast<double>(test.ids.size());
    const bool passed = mean >= cfg.ssim_threshold;

    ensure_dir(apath(cfg, "validate"));
    csv::write(apath(cfg, kSsimTable).string(), {"sample_id", "ssim"}, ssim_rows);
    csv::write(apath(cfg, kValidateSummary).string(),
               {"mean_ssim", "threshold", "passed", "round"},
               {{mean, cfg.ssim_threshold, passed ? 1.0 : 0.0,
                 static_cast<double>(ctx.manifest.augment_round())}});

    Digests outputs;
    add_file(outputs, cfg, kSsimTable);
    add_file(outputs, cfg, kValidateSummary);

    StageOutcome out;
    std::map<std::string, std::string> notes{{"passed", passed ? "1" : "0"},
                                             {"mean_ssim", g17(mean)}};
    if (passed) {
        out.message = "validate: mean SSIM " + g17(mean) + " passes threshold " +
                      g17(cfg.ssim_threshold);
    } else {
        out.exit_code = 2;
        const int round = ctx.manifest.augment_round() + 1;
        if (static_cast<std::size_t>(round) <= cfg.augment_rounds) {
            const DesignTable train = load_train_design(cfg);
            double next = 0.0;
            for (double id : train.ids) next = std::max(next, id + 1.0);
            const std::uint64_t seed =
                derive_seed(cfg.seed, {kDesignSeedTag, 1 + static_cast<std::uint64_t>(round)});
            DesignTable aug;
            aug.thetas = lhd_sample(cfg.augment_count, cfg.lower(), cfg.upper(), seed);
            for (std::size_t i = 0; i < aug.thetas.size(); ++i)
                aug.ids.push_back(next + static_cast<double>(i));
            const std::string rel = augment_rel(round);
            write_design(cfg, rel, aug);
            add_file(outputs, cfg, rel);
            ctx.manifest.set_augment_round(round);
            out.augmented = true;
            notes["augment_file"] = rel;
            notes["augment_seed"] = std::to_string(seed);
            out.message = "validate: mean SSIM " + g17(mean) + " below threshold " +
                          g17(cfg.ssim_threshold) + "; wrote " + rel + " (" +
                          std::to_string(cfg.augment_count) + " rows)";
        } else {
            out.message = "validate: mean SSIM " + g17(mean) + " below threshold " +
                          g17(cfg.ssim_threshold) + "; augmentation cap (" +
                          std::to_string(cfg.augment_rounds) + ") reached";
        }
    }
    finish_stage(ctx, "validate", inputs, outputs, std::move(notes));
    return out;
}

StageOutcome run_infer(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    for (const char* rel : kBundleFiles) require_file(cfg, rel, "fit-surrogate");
    require_file(cfg, kZObjective, "train-vae");
    Digests inputs = base_inputs(ctx);
    for (const char* rel : kBundleFiles) add_file(inputs, cfg, rel);
    add_file(inputs, cfg, kZObjective);
    if (stage_current(ctx, cfg, "infer", inputs)) return skipped_outcome("infer");

    csv::Table zt = csv::read(apath(cfg, kZObjective).string());
    if (zt.rows.size() != 1 || zt.rows[0].size() != cfg.vae.latent_dim)
        throw ShapeError("z_objective.csv: expected one row of " +
                         std::to_string(cfg.vae.latent_dim) + " values");
    const std::vector<double> zo = zt.rows[0];

    auto surrogate =
        std::make_shared<lssvr::LvLssvrModel>(lssvr::load_bundle(apath(cfg, "surrogate").string()));
    abc::Forward forward = [surrogate](const std::vector<double>& theta) {
        return surrogate->predict(theta);
    };
    const abc::PosteriorSummary posterior = abc::run_npmc(cfg.prior(), forward, zo, cfg.npmc);

    ensure_dir(apath(cfg, "posterior"));
    std::vector<std::string> pheader = cfg.names();
    pheader.push_back("weight");
    pheader.push_back("distance");
    std::vector<std::vector<double>> prows;
    for (const abc::Particle& p : posterior.particles) {
        std::vector<double> row = p.theta;
        row.push_back(p.weight);
        row.push_back(p.distance);
        prows.push_back(std::move(row));
    }
    csv::write(apath(cfg, kParticles).string(), pheader, prows);

    std::vector<std::vector<double>> srows;
    for (std::size_t i = 0; i < posterior.mean.size(); ++i)
        srows.push_back({static_cast<double>(i), posterior.mean[i], posterior.stddev[i]});
    csv::write(apath(cfg, kPosteriorSummary).string(), {"param", "mean", "stddev"}, srows);

    std::vector<std::vector<double>> trows;
    for (std::size_t t = 0; t < posterior.epsilon_trace.size(); ++t)
        trows.push_back({static_cast<double>(t + 1), posterior.epsilon_trace[t],
                         posterior.acceptance_trace[t]});
    csv::write(apath(cfg, kTrace).string(), {"generation", "epsilon", "acceptance"}, trows);

    Digests outputs;
    for (const char* rel : {kParticles, kPosteriorSummary, kTrace}) add_file(outputs, cfg, rel);
    const double final_eps =
        posterior.epsilon_trace.empty() ? 0.0 : posterior.epsilon_trace.back();
    finish_stage(ctx, "infer", inputs, outputs,
                 {{"generations", std::to_string(posterior.generations)},
                  {"final_epsilon", g17(final_eps)}});
    StageOutcome out;
    out.message = "infer: " + std::to_string(posterior.generations) +
                  " generations, final epsilon " + g17(final_eps);
    return out;
}

StageOutcome run_report(const RunConfig& cfg) {
    StageCtx ctx = make_ctx(cfg);
    require_file(cfg, kParticles, "infer");
    require_file(cfg, kTrace, "infer");
    Digests inputs = base_inputs(ctx);
    add_file(inputs, cfg, kParticles);
    add_file(inputs, cfg, kTrace);
    if (stage_current(ctx, cfg, "report", inputs)) return skipped_outcome("report");

    const auto names = cfg.names();
    const std::size_t d = names.size();
    csv::Table pt = csv::read(apath(cfg, kParticles).string());
    if (pt.header.size() != d + 2)
        throw ShapeError("particles.csv: column count does not match the configuration");
    std::vector<abc::Particle> particles;
    for (const auto& row : pt.rows) {
        abc::Particle p;
        p.theta.assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d));
        p.weight = row[d];
        p.distance = row[d + 1];
        particles.push_back(std::move(p));
    }
    if (particles.empty()) throw ShapeError("particles.csv: no particles");
    const abc::PosteriorSummary s = abc::summarize(particles);

    ensure_dir(apath(cfg, "report"));
    std::ostringstream summary;
    summary << "parameter,mean,stddev\n";
    for (std::size_t i = 0; i < d; ++i)
        summary << names[i] << ',' << g17(s.mean[i]) << ',' << g17(s.stddev[i]) << '\n';
    write_text(apath(cfg, "report/summary.csv"), summary.str());

    std::vector<std::string> svgs;
    std::set<std::string> used;
    std::vector<double> weights;
    for (const auto& p : particles) weights.push_back(p.weight);
    for (std::size_t i = 0; i < d; ++i) {
        std::string base = sanitize_name(names[i]);
        if (!used.insert(base).second)
            throw ConfigError("parameter names collide after sanitizing: " + base);
        const std::string rel = "report/posterior_" + base + ".svg";
        std::vector<double> values;
        for (const auto& p : particles) values.push_back(p.theta[i]);
        svg::write_histogram(apath(cfg, rel).string(), "posterior of " + names[i], names[i],
                             values, weights, 24, cfg.parameters[i].lo, cfg.parameters[i].hi,
                             s.mean[i]);
        svgs.push_back(rel);
    }

    csv::Table tr = csv::read(apath(cfg, kTrace).string());
    std::vector<double> gen, eps, acc;
    {
        const std::size_t gi = tr.col("generation");
        const std::size_t ei = tr.col("epsilon");
        const std::size_t ai = tr.col("acceptance");
        for (const auto& row : tr.rows) {
            gen.push_back(row[gi]);
            eps.push_back(row[ei]);
            acc.push_back(row[ai]);
        }
    }
    if (gen.empty()) throw ShapeError("trace.csv: no generations");
    svg::write_line_plot(apath(cfg, "report/epsilon_trace.svg").string(), "tolerance schedule",
                         "generation", "epsilon", gen, eps);
    svg::write_line_plot(apath(cfg, "report/acceptance.svg").string(), "acceptance rate",
                         "generation", "acceptance", gen, acc);

    const sim::SimConfig sc = cfg.sim_config();
    std::size_t working = 0;
    for (std::size_t i = 0; i < sc.grid; ++i) {
        const double cy = (static_cast<double>(i) + 0.5) / static_cast<double>(sc.grid);
        for (std::size_t j = 0; j < sc.grid; ++j) {
            const double cx = (static_cast<double>(j) + 0.5) / static_cast<double>(sc.grid);
            if (sc.mask.contains(cx, cy)) ++working;
        }
    }

    std::vector<double> cum;
    double total = 0.0;
    for (const auto& p : particles) {
        total += p.weight;
        cum.push_back(total);
    }
    if (!(total > 0.0)) throw NumericError("report: particle weights sum to zero");

    Rng rng(derive_seed(cfg.seed, {kReportSeedTag}));
    std::vector<std::string> dheader{"draw"};
    for (const auto& n : names) dheader.push_back(n);
    dheader.push_back("crack");
    dheader.push_back("wrinkles");
    dheader.push_back("working_cells");
    dheader.push_back("crack_fraction");
    std::vector<std::vector<double>> drows;
    std::vector<double> crack_counts, crack_fractions;
    for (std::size_t k = 0; k < cfg.report_draws; ++k) {
        const abc::Particle& p = particles[pick_weighted(cum, rng.uniform())];
        sim::StrainField field = sim::simulate(p.theta, sc);
        sim::ZoneLabelGrid labels = sim::classify_elements(field, sc.flc);
        std::size_t crack = 0, wrinkles = 0;
        for (std::size_t i = 0; i < sc.grid; ++i) {
            const double cy = (static_cast<double>(i) + 0.5) / static_cast<double>(sc.grid);
            for (std::size_t j = 0; j < sc.grid; ++j) {
                const double cx = (static_cast<double>(j) + 0.5) / static_cast<double>(sc.grid);
                if (!sc.mask.contains(cx, cy)) continue;
                const sim::Zone z = labels.labels[i * sc.grid + j];
                if (z == sim::Zone::Crack) ++crack;
                if (z == sim::Zone::Wrinkles) ++wrinkles;
            }
        }
        const double frac =
            working == 0 ? 0.0 : static_cast<double>(crack) / static_cast<double>(working);
        std::vector<double> row{static_cast<double>(k + 1)};
        row.insert(row.end(), p.theta.begin(), p.theta.end());
        row.push_back(static_cast<double>(crack));
        row.push_back(static_cast<double>(wrinkles));
        row.push_back(static_cast<double>(working));
        row.push_back(frac);
        drows.push_back(std::move(row));
        crack_counts.push_back(static_cast<double>(crack));
        crack_fractions.push_back(frac);
    }
    csv::write(apath(cfg, "report/defects.csv").string(), dheader, drows);
    svg::write_bar_plot(apath(cfg, "report/defects.svg").string(),
                        "crack cells per posterior draw", "draw", "crack cells", crack_counts,
                        0.02 * static_cast<double>(working));

    std::vector<double> sorted = crack_fractions;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median =
        n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    Digests outputs;
    add_file(outputs, cfg, "report/summary.csv");
    for (const std::string& rel : svgs) add_file(outputs, cfg, rel);
    for (const char* rel :
         {"report/epsilon_trace.svg", "report/acceptance.svg", "report/defects.csv",
          "report/defects.svg"})
        add_file(outputs, cfg, rel);
    finish_stage(ctx, "report", inputs, outputs,
                 {{"median_crack_fraction", g17(median)},
                  {"draws", std::to_string(cfg.report_draws)}});
    StageOutcome out;
    out.message = "report: median crack fraction " + g17(median) + " over " +
                  std::to_string(cfg.report_draws) + " posterior draws";
    return out;
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"design",        "simulate", "build-objective",
                                                "train-vae",     "fit-surrogate", "validate",
                                                "infer",         "report"};
    return names;
}

StageOutcome run_stage(const std::string& name, const RunConfig& cfg) {
    if (name == "design") return run_design(cfg);
    if (name == "simulate") return run_simulate(cfg);
    if (name == "build-objective") return run_build_objective(cfg);
    if (name == "train-vae") return run_train_vae(cfg);
    if (name == "fit-surrogate") return run_fit_surrogate(cfg);
    if (name == "validate") return run_validate(cfg);
    if (name == "infer") return run_infer(cfg);
    if (name == "report") return run_report(cfg);
    throw ConfigError("unknown stage '" + name + "'");
}

StageOutcome run_full(const RunConfig& cfg) {
    while (true) {
        run_design(cfg);
        run_simulate(cfg);
        run_build_objective(cfg);
        run_train_vae(cfg);
        run_fit_surrogate(cfg);
        StageOutcome v = run_validate(cfg);
        if (v.exit_code == 0) break;
        if (!v.augmented) return v;
    }
    run_infer(cfg);
    return run_report(cfg);
}

} // namespace invabc::pipeline
