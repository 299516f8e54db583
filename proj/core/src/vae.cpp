#include "invabc/vae.hpp"

#include "invabc/adam.hpp"
#include "invabc/errors.hpp"
#include "invabc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invabc::vae {

namespace {

std::size_t halving_depth(std::size_t side) {
    if (side < 8) throw ConfigError("vae: image side must be at least 8");
    std::size_t l = 0, s = side;
    while (s > 4 && s % 2 == 0) {
        s /= 2;
        ++l;
    }
    if (s != 4) throw ConfigError("vae: image side must be 4*2^L, got " + std::to_string(side));
    return l;
}

std::size_t encoder_channels(std::size_t i) { return std::min<std::size_t>(32u << i, 512); }

nn::Network build_encoder(const VaeConfig& cfg) {
    const std::size_t depth = halving_depth(cfg.image_h);
    nn::Network net;
    std::size_t prev = cfg.channels;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t ch = encoder_channels(i);
        net.add(std::make_unique<nn::Conv2d>(4, 4, prev, ch, 2));
        net.add(std::make_unique<nn::BatchNorm>(ch));
        net.add(std::make_unique<nn::Activation>(nn::Act::LRelu, cfg.lrelu_lambda));
        prev = ch;
    }
    net.add(std::make_unique<nn::Flatten>());
    net.add(std::make_unique<nn::Dense>(16 * prev, 2 * cfg.latent_dim));
    return net;
}

nn::Network build_decoder(const VaeConfig& cfg) {
    const std::size_t depth = halving_depth(cfg.image_h);
    nn::Network net;
    net.add(std::make_unique<nn::Dense>(cfg.latent_dim, 512));
    net.add(std::make_unique<nn::Activation>(nn::Act::Relu));
    net.add(std::make_unique<nn::Reshape>(4, 4, 32));
    std::size_t prev = 32;
    for (std::size_t i = 0; i < depth; ++i) {
        const bool last = i + 1 == depth;
        const std::size_t ch = last ? cfg.channels : encoder_channels(depth - 2 - i);
        net.add(std::make_unique<nn::ConvTranspose2d>(4, 4, prev, ch, 2));
        net.add(std::make_unique<nn::Activation>(last ? nn::Act::Sigmoid : nn::Act::Relu));
        prev = ch;
    }
    return net;
}

} // namespace

double kl_term(const LatentStats& s) {
    if (s.u.size() != s.log_var.size()) throw ShapeError("kl_term: mean/log-variance length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.u.size(); ++i)
        acc += std::exp(s.log_var[i]) - s.log_var[i] + s.u[i] * s.u[i] - 1.0;
    return 0.5 * acc;
}

std::vector<double> reparameterize(const LatentStats& s, const std::vector<double>& e) {
    if (s.u.size() != e.size()) throw ShapeError("reparameterize: noise length mismatch");
    std::vector<double> z(s.u.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = std::exp(0.5 * s.log_var[i]) * e[i] + s.u[i];
    return z;
}

double recon_loss(const nn::Tensor& d, const nn::Tensor& y) {
    nn::check_same_shape(d, y, "recon_loss");
    double acc = 0.0;
    const double* dd = d.data();
    const double* yd = y.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double diff = dd[i] - yd[i];
        acc += diff * diff;
    }
    return acc;
}

double vae_loss(const nn::Tensor& d, const LatentStats& s, const nn::Tensor& y) {
    return kl_term(s) + recon_loss(d, y);
}

VaeModel::VaeModel(const VaeConfig& cfg)
    : cfg_(cfg), encoder_(build_encoder(cfg)), decoder_(build_decoder(cfg)) {
    if (cfg.image_h != cfg.image_w)
        throw ConfigError("vae: only square images are supported");
    if (cfg.latent_dim == 0) throw ConfigError("vae: latent_dim must be positive");
    encoder_.init(derive_seed(cfg.seed, {0x0e}));
    decoder_.init(derive_seed(cfg.seed, {0x0d}));
}

LatentStats VaeModel::encode(const nn::Tensor& image) {
    if (image.n() != 1 || image.h() != cfg_.image_h || image.w() != cfg_.image_w ||
        image.c() != cfg_.channels)
        throw ShapeError("encode: expected a single image of the configured shape, got " +
                         image.shape_str());
    return encode_batch(image).front();
}

std::vector<LatentStats> VaeModel::encode_batch(const nn::Tensor& images) {
    if (images.h() != cfg_.image_h || images.w() != cfg_.image_w || images.c() != cfg_.channels)
        throw ShapeError("encode: image shape mismatch " + images.shape_str());
    std::lock_guard<std::mutex> lock(*eval_mutex_);
    nn::Tensor out = encoder_.forward(images, false);
    const std::size_t m = cfg_.latent_dim;
    std::vector<LatentStats> stats(images.n());
    for (std::size_t i = 0; i < images.n(); ++i) {
        stats[i].u.assign(out.data() + i * 2 * m, out.data() + i * 2 * m + m);
        stats[i].log_var.assign(out.data() + i * 2 * m + m, out.data() + (i + 1) * 2 * m);
    }
    return stats;
}

nn::Tensor VaeModel::decode(const std::vector<double>& z) {
    if (z.size() != cfg_.latent_dim)
        throw ShapeError("decode: latent length " + std::to_string(z.size()) + ", expected " +
                         std::to_string(cfg_.latent_dim));
    std::lock_guard<std::mutex> lock(*eval_mutex_);
    nn::Tensor zin(1, 1, 1, cfg_.latent_dim);
    std::copy(z.begin(), z.end(), zin.data());
    return decoder_.forward(zin, false);
}

double batch_grads(VaeModel& model, const nn::Tensor& x, const std::vector<double>& noise) {
    const std::size_t bsz = x.n();
    const std::size_t m = model.latent_dim();
    if (noise.size() != bsz * m) throw ShapeError("batch_grads: noise length mismatch");

    nn::Tensor enc_out = model.encoder().forward(x, true);
    nn::Tensor z(bsz, 1, 1, m);
    double kl_sum = 0.0;
    for (std::size_t i = 0; i < bsz; ++i) {
        const double* u = enc_out.data() + i * 2 * m;
        const double* lv = u + m;
        for (std::size_t j = 0; j < m; ++j) {
            z.data()[i * m + j] = std::exp(0.5 * lv[j]) * noise[i * m + j] + u[j];
            kl_sum += 0.5 * (std::exp(lv[j]) - lv[j] + u[j] * u[j] - 1.0);
        }
    }
    nn::Tensor y = model.decoder().forward(z, true);
    double recon_sum = 0.0;
    nn::Tensor dy(bsz, x.h(), x.w(), x.c());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double diff = y.data()[i] - x.data()[i];
        recon_sum += diff * diff;
        dy.data()[i] = 2.0 * diff / static_cast<double>(bsz);
    }

    model.encoder().zero_grad();
    model.decoder().zero_grad();
    nn::Tensor dz = model.decoder().backward(dy);
    nn::Tensor denc(bsz, 1, 1, 2 * m);
    const double inv_b = 1.0 / static_cast<double>(bsz);
    for (std::size_t i = 0; i < bsz; ++i) {
        const double* u = enc_out.data() + i * 2 * m;
        const double* lv = u + m;
        for (std::size_t j = 0; j < m; ++j) {
            const double dzj = dz.data()[i * m + j];
            denc.data()[i * 2 * m + j] = inv_b * u[j] + dzj;
            denc.data()[i * 2 * m + m + j] = inv_b * 0.5 * (std::exp(lv[j]) - 1.0) +
                                             dzj * 0.5 * noise[i * m + j] * std::exp(0.5 * lv[j]);
        }
    }
    model.encoder().backward(denc);
    return (kl_sum + recon_sum) / static_cast<double>(bsz);
}

TrainResult train(VaeModel& model, const std::vector<nn::Tensor>& images,
                  std::size_t objective_index, const VaeConfig& cfg) {
    if (images.empty()) throw ConfigError("vae train: empty corpus");
    if (objective_index >= images.size())
        throw ConfigError("vae train: objective index out of range");
    if (cfg.epochs == 0 || cfg.batch == 0) throw ConfigError("vae train: epochs and batch must be positive");
    const std::size_t n = images.size();
    const std::size_t m = cfg.latent_dim;
    const std::size_t hw = cfg.image_h * cfg.image_w * cfg.channels;
    for (const auto& img : images)
        if (img.n() != 1 || img.item_size() != hw)
            throw ShapeError("vae train: corpus image shape " + img.shape_str());

    nn::Adam opt(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam);
    std::vector<nn::ParamRef> params = model.encoder().params();
    for (auto& p : model.decoder().params()) params.push_back(p);

    Rng shuffle_rng(derive_seed(cfg.seed, {0x51}));
    Rng noise_rng(derive_seed(cfg.seed, {0x52}));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.log.seed = cfg.seed;
    result.log.epoch_loss.reserve(cfg.epochs);

    const std::size_t batch_max = std::min(cfg.batch, n);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.index(i + 1)]);
        double epoch_sum = 0.0;
        for (std::size_t start = 0, batch_idx = 0; start < n; start += batch_max, ++batch_idx) {
            const std::size_t bsz = std::min(batch_max, n - start);
            nn::Tensor x(bsz, cfg.image_h, cfg.image_w, cfg.channels);
            for (std::size_t i = 0; i < bsz; ++i)
                std::copy(images[order[start + i]].data(), images[order[start + i]].data() + hw,
                          x.data() + i * hw);

            std::vector<double> noise(bsz * m);
            for (auto& e : noise) e = noise_rng.normal();
            const double batch_loss = batch_grads(model, x, noise);
            if (!std::isfinite(batch_loss))
                throw NumericError("vae train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_idx));
            epoch_sum += batch_loss * static_cast<double>(bsz);
            opt.step(params);
        }
        result.log.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
    }

    for (std::size_t start = 0; start < n; start += 32) {
        const std::size_t bsz = std::min<std::size_t>(32, n - start);
        nn::Tensor x(bsz, cfg.image_h, cfg.image_w, cfg.channels);
        for (std::size_t i = 0; i < bsz; ++i)
            std::copy(images[start + i].data(), images[start + i].data() + hw, x.data() + i * hw);
        auto stats = model.encode_batch(x);
        for (std::size_t i = 0; i < bsz; ++i) {
            if (start + i == objective_index)
                result.zo = stats[i].u;
            else
                result.zs.push_back(stats[i].u);
        }
    }
    return result;
}

} // namespace invabc::vae
