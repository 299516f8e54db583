#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace invabc::lssvr {

enum class KernelKind : int { Rbf = 0 };

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double bandwidth = 1.0;
};

/// K(a, b); RBF gives exp(-|a-b|^2 / (2 bw^2)).
double kernel_value(const KernelSpec& k, const std::vector<double>& a,
                    const std::vector<double>& b);

/// Gram matrix of the anchors, n*n row-major.
std::vector<double> kernel_matrix(const std::vector<std::vector<double>>& anchors,
                                  const KernelSpec& k);

/// Single-output model: f(theta) = sum_i alphas[i] K(theta, anchors[i]) + bias.
struct LssvrModel {
    std::vector<std::vector<double>> anchors;
    std::vector<double> alphas;
    /// Training residuals z_i - f(theta_i); stationarity makes them alphas/gamma_reg.
    std::vector<double> residuals;
    double bias = 0.0;
    KernelSpec kernel;
    double gamma_reg = 1.0;

    double predict(const std::vector<double>& theta) const;
};

/// Solves the bordered system [[0, 1^T], [1, K + I/gamma]] [b; alpha] = [0; z].
LssvrModel fit(const std::vector<std::vector<double>>& anchors, const std::vector<double>& targets,
               double gamma_reg, const KernelSpec& kernel);

/// One LssvrModel per output column, all trained on the same anchors.
/// Inputs are min-max normalized to [0,1]^d with the stored bounds before
/// any kernel evaluation; empty bounds leave inputs untouched.
struct LvLssvrModel {
    std::vector<double> lo, hi;
    std::vector<LssvrModel> per_latent;

    std::size_t input_dim() const;
    std::size_t output_dim() const { return per_latent.size(); }
    std::vector<double> predict(const std::vector<double>& theta) const;
};

LvLssvrModel fit_multi(const std::vector<std::vector<double>>& anchors,
                       const std::vector<std::vector<double>>& targets, double gamma_reg,
                       const KernelSpec& kernel, const std::vector<double>& lo = {},
                       const std::vector<double>& hi = {});

struct HyperGrid {
    std::vector<double> bandwidths;
    std::vector<double> gammas;
};

/// bandwidth in {0.1, 0.2, 0.5, 1, 2} * sqrt(dim), gamma_reg in {1, 1e2, 1e4}.
HyperGrid default_grid(std::size_t dim);

struct HyperChoice {
    double bandwidth = 0.0;
    double gamma_reg = 0.0;
    double cv_rmse = 0.0;
};

/// Picks one (bandwidth, gamma_reg) shared by every output column, minimizing
/// the mean k-fold validation RMSE (row i belongs to fold i mod folds). Ties
/// go to the smaller bandwidth, then the smaller gamma_reg.
HyperChoice select_hyperparams(const std::vector<std::vector<double>>& anchors,
                               const std::vector<std::vector<double>>& targets,
                               const HyperGrid& grid, const std::vector<double>& lo = {},
                               const std::vector<double>& hi = {}, std::size_t folds = 5);

/// Persists the model as meta.csv, bounds.csv, anchors.csv, weights.csv
/// under dir; anchors are stored in normalized coordinates.
void save_bundle(const LvLssvrModel& model, const std::string& dir);
LvLssvrModel load_bundle(const std::string& dir);

} // namespace invabc::lssvr
