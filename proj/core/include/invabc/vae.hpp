#pragma once

#include "invabc/layers.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

namespace invabc::vae {

struct VaeConfig {
    std::size_t image_h = 64;
    std::size_t image_w = 64;
    std::size_t channels = 3;
    std::size_t latent_dim = 8;
    std::size_t epochs = 150;
    std::size_t batch = 16;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double lrelu_lambda = 0.2;
    std::uint64_t seed = 1;
};

struct LatentStats {
    std::vector<double> u;
    std::vector<double> log_var;
};

/// KL divergence of N(u, diag(exp(log_var))) from N(0, I):
/// 1/2 * sum(exp(lv) - lv + u^2 - 1). Nonnegative, zero iff u = lv = 0.
double kl_term(const LatentStats& s);

/// Z = exp(log_var/2) * e + u elementwise.
std::vector<double> reparameterize(const LatentStats& s, const std::vector<double>& e);

/// Squared error summed over all pixels and channels.
double recon_loss(const nn::Tensor& d, const nn::Tensor& y);

double vae_loss(const nn::Tensor& d, const LatentStats& s, const nn::Tensor& y);

/// Convolutional encoder/decoder pair. The image side must be a power of two
/// of at least 8; each halving step is one stride-2 4x4 conv (encoder) or its
/// transpose (decoder). Encoder channels double from 32, capped at 512; the
/// decoder mirrors them down to the final 3-channel sigmoid layer. The
/// encoder emits a 2m vector holding the latent mean and log-variance.
class VaeModel {
public:
    explicit VaeModel(const VaeConfig& cfg);

    const VaeConfig& config() const { return cfg_; }
    std::size_t latent_dim() const { return cfg_.latent_dim; }

    /// Deterministic eval-mode encode of a single (1,H,W,C) image.
    LatentStats encode(const nn::Tensor& image);

    /// Deterministic eval-mode decode of one latent vector to a (1,H,W,C)
    /// image in [0,1].
    nn::Tensor decode(const std::vector<double>& z);

    /// Eval-mode encode of a stacked (N,H,W,C) batch.
    std::vector<LatentStats> encode_batch(const nn::Tensor& images);

    nn::Network& encoder() { return encoder_; }
    nn::Network& decoder() { return decoder_; }

private:
    VaeConfig cfg_;
    nn::Network encoder_;
    nn::Network decoder_;
    std::unique_ptr<std::mutex> eval_mutex_ = std::make_unique<std::mutex>();
};

struct TrainLog {
    std::vector<double> epoch_loss;
    std::uint64_t seed = 0;
};

struct TrainResult {
    TrainLog log;
    /// Latent means of every non-objective image, in input order.
    std::vector<std::vector<double>> zs;
    /// Latent mean of the objective image.
    std::vector<double> zo;
};

/// Trains in place on the full corpus (objective image included, unweighted),
/// then eval-encodes everything. Aborts with a NumericError naming the epoch
/// and batch if the loss leaves the finite range.
TrainResult train(VaeModel& model, const std::vector<nn::Tensor>& images,
                  std::size_t objective_index, const VaeConfig& cfg);

/// One training-mode forward/backward pass on a stacked (B,H,W,C) batch with
/// caller-supplied reparameterization noise (B*m values). Zeroes and then
/// fills all parameter gradients; returns the batch loss (mean over items of
/// KL + squared reconstruction error). The train loop is built on this; it
/// is exposed so gradients can be verified against finite differences.
double batch_grads(VaeModel& model, const nn::Tensor& x, const std::vector<double>& noise);

} // namespace invabc::vae
