#include "invabc/lssvr.hpp"

#include "invabc/csv.hpp"
#include "invabc/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

namespace invabc::lssvr {

namespace {

void check_kernel(const KernelSpec& k) {
    if (k.kind != KernelKind::Rbf) throw ConfigError("lssvr: unknown kernel kind");
    if (!(k.bandwidth > 0.0)) throw ConfigError("lssvr: bandwidth must be positive");
}

void check_anchors(const std::vector<std::vector<double>>& anchors) {
    if (anchors.empty()) throw ConfigError("lssvr: need at least one anchor");
    const std::size_t d = anchors.front().size();
    if (d == 0) throw ConfigError("lssvr: anchors must have positive dimension");
    for (const auto& a : anchors)
        if (a.size() != d) throw ShapeError("lssvr: anchors have mixed dimensions");
}

std::vector<double> normalize_point(const std::vector<double>& theta,
                                    const std::vector<double>& lo, const std::vector<double>& hi) {
    if (lo.empty()) return theta;
    std::vector<double> out(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) out[j] = (theta[j] - lo[j]) / (hi[j] - lo[j]);
    return out;
}

std::vector<std::vector<double>> normalize_set(const std::vector<std::vector<double>>& thetas,
                                               const std::vector<double>& lo,
                                               const std::vector<double>& hi) {
    if (lo.empty()) return thetas;
    std::vector<std::vector<double>> out;
    out.reserve(thetas.size());
    for (const auto& t : thetas) out.push_back(normalize_point(t, lo, hi));
    return out;
}

void check_bounds(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t d) {
    if (lo.empty() && hi.empty()) return;
    if (lo.size() != d || hi.size() != d)
        throw ConfigError("lssvr: bounds length does not match the input dimension");
    for (std::size_t j = 0; j < d; ++j)
        if (!(lo[j] < hi[j])) throw ConfigError("lssvr: bounds must satisfy lo < hi");
}

} // namespace

double kernel_value(const KernelSpec& k, const std::vector<double>& a,
                    const std::vector<double>& b) {
    check_kernel(k);
    if (a.size() != b.size()) throw ShapeError("lssvr kernel: input dimensions differ");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d2 += diff * diff;
    }
    return std::exp(-d2 / (2.0 * k.bandwidth * k.bandwidth));
}

std::vector<double> kernel_matrix(const std::vector<std::vector<double>>& anchors,
                                  const KernelSpec& k) {
    check_kernel(k);
    check_anchors(anchors);
    const std::size_t n = anchors.size();
    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        gram[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = kernel_value(k, anchors[i], anchors[j]);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    return gram;
}

double LssvrModel::predict(const std::vector<double>& theta) const {
    if (anchors.empty()) throw ConfigError("lssvr predict: empty model");
    if (theta.size() != anchors.front().size())
        throw ShapeError("lssvr predict: input has dimension " + std::to_string(theta.size()) +
                         ", model expects " + std::to_string(anchors.front().size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i)
        acc += alphas[i] * kernel_value(kernel, theta, anchors[i]);
    return acc + bias;
}

LssvrModel fit(const std::vector<std::vector<double>>& anchors, const std::vector<double>& targets,
               double gamma_reg, const KernelSpec& kernel) {
    check_kernel(kernel);
    check_anchors(anchors);
    if (targets.size() != anchors.size())
        throw ShapeError("lssvr fit: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(anchors.size()) + " anchors");
    if (!(gamma_reg > 0.0)) throw ConfigError("lssvr fit: gamma_reg must be positive");

    const std::size_t n = anchors.size();
    const std::vector<double> gram = kernel_matrix(anchors, kernel);

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        m(0, 1 + i) = 1.0;
        m(1 + i, 0) = 1.0;
        for (std::size_t j = 0; j < n; ++j) m(1 + i, 1 + j) = gram[i * n + j];
        m(1 + i, 1 + i) += 1.0 / gamma_reg;
        rhs(1 + i) = targets[i];
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const double rcond = lu.rcond();
    Eigen::VectorXd x = lu.solve(rhs);
    // rcond's estimate is garbage when a pivot is exactly zero, so check the
    // pivot spread as well
    const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
    const bool degenerate = pivots.minCoeff() <= pivots.maxCoeff() * 1e-14;
    if (!x.allFinite() || degenerate || !(rcond > 1e-14)) {
        std::ostringstream msg;
        msg << "lssvr fit: near-singular system, rcond ~ " << rcond;
        throw NumericError(msg.str());
    }

    LssvrModel model;
    model.anchors = anchors;
    model.kernel = kernel;
    model.gamma_reg = gamma_reg;
    model.bias = x(0);
    model.alphas.assign(x.data() + 1, x.data() + 1 + n);
    model.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += model.alphas[j] * gram[i * n + j];
        model.residuals[i] = targets[i] - (acc + model.bias);
    }
    return model;
}

std::size_t LvLssvrModel::input_dim() const {
    if (!lo.empty()) return lo.size();
    if (per_latent.empty() || per_latent.front().anchors.empty()) return 0;
    return per_latent.front().anchors.front().size();
}

std::vector<double> LvLssvrModel::predict(const std::vector<double>& theta) const {
    if (per_latent.empty()) throw ConfigError("lssvr predict: empty model");
    if (theta.size() != input_dim())
        throw ShapeError("lssvr predict: input has dimension " + std::to_string(theta.size()) +
                         ", model expects " + std::to_string(input_dim()));
    const std::vector<double> t = normalize_point(theta, lo, hi);
    std::vector<double> out(per_latent.size());
    for (std::size_t j = 0; j < per_latent.size(); ++j) out[j] = per_latent[j].predict(t);
    return out;
}

LvLssvrModel fit_multi(const std::vector<std::vector<double>>& anchors,
                       const std::vector<std::vector<double>>& targets, double gamma_reg,
                       const KernelSpec& kernel, const std::vector<double>& lo,
                       const std::vector<double>& hi) {
    check_anchors(anchors);
    if (targets.size() != anchors.size())
        throw ShapeError("lssvr fit_multi: target row count does not match anchors");
    const std::size_t m = targets.front().size();
    if (m == 0) throw ConfigError("lssvr fit_multi: need at least one output column");
    for (const auto& row : targets)
        if (row.size() != m) throw ShapeError("lssvr fit_multi: ragged target rows");
    check_bounds(lo, hi, anchors.front().size());

    const std::vector<std::vector<double>> scaled = normalize_set(anchors, lo, hi);
    LvLssvrModel model;
    model.lo = lo;
    model.hi = hi;
    model.per_latent.reserve(m);
    std::vector<double> column(anchors.size());
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < anchors.size(); ++i) column[i] = targets[i][j];
        model.per_latent.push_back(fit(scaled, column, gamma_reg, kernel));
    }
    return model;
}

HyperGrid default_grid(std::size_t dim) {
    if (dim == 0) throw ConfigError("lssvr grid: dimension must be positive");
    const double root = std::sqrt(static_cast<double>(dim));
    return {{0.1 * root, 0.2 * root, 0.5 * root, 1.0 * root, 2.0 * root}, {1.0, 1e2, 1e4}};
}

HyperChoice select_hyperparams(const std::vector<std::vector<double>>& anchors,
                               const std::vector<std::vector<double>>& targets,
                               const HyperGrid& grid, const std::vector<double>& lo,
                               const std::vector<double>& hi, std::size_t folds) {
    check_anchors(anchors);
    if (grid.bandwidths.empty() || grid.gammas.empty())
        throw ConfigError("lssvr select: empty hyperparameter grid");
    if (folds < 2) throw ConfigError("lssvr select: need at least two folds");
    const std::size_t n = anchors.size();
    if (n < folds)
        throw ConfigError("lssvr select: " + std::to_string(n) + " rows cannot fill " +
                          std::to_string(folds) + " folds");
    if (targets.size() != n) throw ShapeError("lssvr select: target row count does not match");
    const std::size_t m = targets.front().size();
    check_bounds(lo, hi, anchors.front().size());

    std::vector<double> bws = grid.bandwidths;
    std::vector<double> gammas = grid.gammas;
    std::sort(bws.begin(), bws.end());
    std::sort(gammas.begin(), gammas.end());

    const std::vector<std::vector<double>> scaled = normalize_set(anchors, lo, hi);

    HyperChoice best;
    best.cv_rmse = std::numeric_limits<double>::infinity();
    for (double bw : bws)
        for (double g : gammas) {
            const KernelSpec k{KernelKind::Rbf, bw};
            double score = 0.0;
            bool usable = true;
            for (std::size_t f = 0; f < folds && usable; ++f) {
                std::vector<std::vector<double>> tr_x, va_x;
                std::vector<std::vector<double>> tr_z, va_z;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i % folds == f) {
                        va_x.push_back(scaled[i]);
                        va_z.push_back(targets[i]);
                    } else {
                        tr_x.push_back(scaled[i]);
                        tr_z.push_back(targets[i]);
                    }
                }
                try {
                    const LvLssvrModel fold_model = fit_multi(tr_x, tr_z, g, k);
                    double se = 0.0;
                    for (std::size_t i = 0; i < va_x.size(); ++i) {
                        const std::vector<double> pred = fold_model.predict(va_x[i]);
                        for (std::size_t j = 0; j < m; ++j) {
                            const double diff = pred[j] - va_z[i][j];
                            se += diff * diff;
                        }
                    }
                    score += std::sqrt(se / static_cast<double>(va_x.size() * m));
                } catch (const NumericError&) {
                    usable = false;
                }
            }
            if (!usable) continue;
            score /= static_cast<double>(folds);
            if (score < best.cv_rmse) best = {bw, g, score};
        }
    if (!std::isfinite(best.cv_rmse))
        throw NumericError("lssvr select: every grid point produced a singular system");
    return best;
}

void save_bundle(const LvLssvrModel& model, const std::string& dir) {
    if (model.per_latent.empty()) throw ConfigError("lssvr save: empty model");
    std::filesystem::create_directories(dir);
    const std::size_t n = model.per_latent.front().anchors.size();
    const std::size_t d = model.per_latent.front().anchors.front().size();
    const std::size_t m = model.per_latent.size();

    csv::write(dir + "/meta.csv", {"kernel", "bandwidth", "gamma_reg", "n", "dim", "outputs"},
               {{static_cast<double>(static_cast<int>(model.per_latent.front().kernel.kind)),
                 model.per_latent.front().kernel.bandwidth, model.per_latent.front().gamma_reg,
                 static_cast<double>(n), static_cast<double>(d), static_cast<double>(m)}});

    std::vector<std::vector<double>> bounds_rows;
    for (std::size_t j = 0; j < model.lo.size(); ++j)
        bounds_rows.push_back({static_cast<double>(j), model.lo[j], model.hi[j]});
    csv::write(dir + "/bounds.csv", {"dim", "lo", "hi"}, bounds_rows);

    std::vector<std::string> anchor_header(d);
    for (std::size_t j = 0; j < d; ++j) anchor_header[j] = "a" + std::to_string(j);
    csv::write(dir + "/anchors.csv", anchor_header, model.per_latent.front().anchors);

    std::vector<std::string> weight_header = {"latent", "bias"};
    for (std::size_t i = 0; i < n; ++i) weight_header.push_back("alpha" + std::to_string(i));
    std::vector<std::vector<double>> weight_rows;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> row = {static_cast<double>(j), model.per_latent[j].bias};
        row.insert(row.end(), model.per_latent[j].alphas.begin(), model.per_latent[j].alphas.end());
        weight_rows.push_back(std::move(row));
    }
    csv::write(dir + "/weights.csv", weight_header, weight_rows);
}

LvLssvrModel load_bundle(const std::string& dir) {
    const csv::Table meta = csv::read(dir + "/meta.csv");
    if (meta.rows.size() != 1 || meta.header.size() != 6)
        throw IoError("lssvr load: malformed meta.csv in " + dir);
    const auto& mr = meta.rows.front();
    KernelSpec kernel;
    kernel.kind = static_cast<KernelKind>(static_cast<int>(mr[meta.col("kernel")]));
    kernel.bandwidth = mr[meta.col("bandwidth")];
    const double gamma_reg = mr[meta.col("gamma_reg")];
    const auto n = static_cast<std::size_t>(mr[meta.col("n")]);
    const auto d = static_cast<std::size_t>(mr[meta.col("dim")]);
    const auto m = static_cast<std::size_t>(mr[meta.col("outputs")]);
    check_kernel(kernel);

    const csv::Table bounds = csv::read(dir + "/bounds.csv");
    LvLssvrModel model;
    if (!bounds.rows.empty()) {
        if (bounds.rows.size() != d) throw IoError("lssvr load: bounds.csv row count mismatch");
        model.lo.resize(d);
        model.hi.resize(d);
        for (const auto& row : bounds.rows) {
            const auto j = static_cast<std::size_t>(row[bounds.col("dim")]);
            if (j >= d) throw IoError("lssvr load: bounds.csv dimension index out of range");
            model.lo[j] = row[bounds.col("lo")];
            model.hi[j] = row[bounds.col("hi")];
        }
    }

    const csv::Table anchors_tab = csv::read(dir + "/anchors.csv");
    if (anchors_tab.rows.size() != n || (n > 0 && anchors_tab.header.size() != d))
        throw IoError("lssvr load: anchors.csv shape mismatch");

    const csv::Table weights = csv::read(dir + "/weights.csv");
    if (weights.rows.size() != m || weights.header.size() != 2 + n)
        throw IoError("lssvr load: weights.csv shape mismatch");

    model.per_latent.resize(m);
    for (const auto& row : weights.rows) {
        const auto j = static_cast<std::size_t>(row[weights.col("latent")]);
        if (j >= m) throw IoError("lssvr load: weights.csv latent index out of range");
        LssvrModel& comp = model.per_latent[j];
        comp.anchors = anchors_tab.rows;
        comp.kernel = kernel;
        comp.gamma_reg = gamma_reg;
        comp.bias = row[weights.col("bias")];
        comp.alphas.assign(row.begin() + 2, row.end());
        comp.residuals.resize(n);
        for (std::size_t i = 0; i < n; ++i) comp.residuals[i] = comp.alphas[i] / gamma_reg;
    }
    return model;
}

} // namespace invabc::lssvr
