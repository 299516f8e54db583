#include "doctest.h"

#include "invabc/checkpoint.hpp"
#include "invabc/errors.hpp"
#include "invabc/vae.hpp"
#include "support/fd.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace invabc;
using namespace invabc::vae;

namespace {

nn::Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    nn::Tensor t(1, h, w, 3);
    Rng rng(seed);
    for (auto& v : t.vec()) v = rng.uniform();
    return t;
}

VaeConfig small_cfg() {
    VaeConfig cfg;
    cfg.image_h = cfg.image_w = 16;
    cfg.latent_dim = 2;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("kl term evaluates the closed form") {
    CHECK(kl_term({{0.0}, {0.0}}) == 0.0);
    CHECK(kl_term({{1.0}, {0.0}}) == doctest::Approx(0.5).epsilon(1e-12));
    // per dim: 0.5*(e^2 - 2 + 0 - 1), two dims
    CHECK(kl_term({{0.0, 0.0}, {2.0, 2.0}}) ==
          doctest::Approx(std::exp(2.0) - 3.0).epsilon(1e-12));
    CHECK(kl_term({{0.0, 0.0}, {2.0, 2.0}}) == doctest::Approx(4.3890560989306495).epsilon(1e-12));
    CHECK(kl_term({{1.5}, {0.7}}) ==
          doctest::Approx(0.5 * (std::exp(0.7) - 0.7 + 2.25 - 1.0)).epsilon(1e-12));
}

TEST_CASE("kl term is nonnegative and zero only at the prior") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        LatentStats s;
        for (int j = 0; j < 4; ++j) {
            s.u.push_back(rng.uniform(-3, 3));
            s.log_var.push_back(rng.uniform(-3, 3));
        }
        CHECK(kl_term(s) >= 0.0);
    }
    LatentStats nonzero{{0.1}, {0.0}};
    CHECK(kl_term(nonzero) > 0.0);
    LatentStats offvar{{0.0}, {0.2}};
    CHECK(kl_term(offvar) > 0.0);
}

TEST_CASE("reparameterize applies scale and shift") {
    CHECK(reparameterize({{0.5}, {0.0}}, {0.0})[0] == doctest::Approx(0.5));
    CHECK(reparameterize({{0.0}, {0.0}}, {1.5})[0] == doctest::Approx(1.5));
    CHECK(reparameterize({{2.0}, {std::log(4.0)}}, {-1.0})[0] == doctest::Approx(0.0).epsilon(1e-12));
    LatentStats s{{0.3, -0.7}, {0.4, -1.0}};
    auto z = reparameterize(s, {0.0, 0.0});
    CHECK(z[0] == s.u[0]);
    CHECK(z[1] == s.u[1]);
}

TEST_CASE("reconstruction loss is the summed squared error") {
    nn::Tensor d(1, 1, 1, 3), y(1, 1, 1, 3);
    d.vec() = {1.0, 1.0, 1.0};
    y.vec() = {0.5, 0.5, 0.5};
    CHECK(recon_loss(d, d) == 0.0);
    CHECK(recon_loss(d, y) == doctest::Approx(0.75).epsilon(1e-12));
    nn::Tensor d2 = d, y2 = y;
    const double a = 3.0;
    for (auto& v : d2.vec()) v *= a;
    for (auto& v : y2.vec()) v *= a;
    CHECK(recon_loss(d2, y2) == doctest::Approx(a * a * recon_loss(d, y)).epsilon(1e-12));
}

TEST_CASE("vae loss is the sum of its parts and never below the kl term") {
    nn::Tensor d(1, 1, 1, 3), y(1, 1, 1, 3);
    d.vec() = {1.0, 1.0, 1.0};
    y.vec() = {0.5, 0.5, 0.5};
    LatentStats s{{1.0}, {0.0}};
    CHECK(vae_loss(d, s, y) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(vae_loss(d, s, d) == doctest::Approx(kl_term(s)).epsilon(1e-12));
    CHECK(vae_loss(d, s, y) >= kl_term(s));
    LatentStats prior{{0.0}, {0.0}};
    CHECK(vae_loss(d, prior, d) == 0.0);
}

TEST_CASE("architecture at 256 matches the published layer tables") {
    VaeConfig cfg;
    cfg.image_h = cfg.image_w = 256;
    cfg.latent_dim = 1;
    VaeModel model(cfg);

    auto enc_shapes = model.encoder().layer_shapes({256, 256, 3});
    const auto& enc = model.encoder().layers();
    std::vector<nn::Shape3> conv_out;
    for (std::size_t i = 0; i < enc.size(); ++i)
        if (enc[i]->kind() == "conv") conv_out.push_back(enc_shapes[i]);
    REQUIRE(conv_out.size() == 6);
    const std::size_t want_side[6] = {128, 64, 32, 16, 8, 4};
    const std::size_t want_ch[6] = {32, 64, 128, 256, 512, 512};
    for (int i = 0; i < 6; ++i) {
        CHECK(conv_out[i].h == want_side[i]);
        CHECK(conv_out[i].w == want_side[i]);
        CHECK(conv_out[i].c == want_ch[i]);
    }
    for (std::size_t i = 0; i < enc.size(); ++i)
        if (enc[i]->kind() == "flatten") CHECK(enc_shapes[i].c == 8192);
    CHECK(enc_shapes.back() == nn::Shape3{1, 1, 2});

    auto dec_shapes = model.decoder().layer_shapes({1, 1, 1});
    const auto& dec = model.decoder().layers();
    std::vector<nn::Shape3> tconv_out;
    for (std::size_t i = 0; i < dec.size(); ++i) {
        if (dec[i]->kind() == "dense") CHECK(dec_shapes[i].c == 512);
        if (dec[i]->kind() == "reshape") CHECK(dec_shapes[i] == nn::Shape3{4, 4, 32});
        if (dec[i]->kind() == "conv_transpose") tconv_out.push_back(dec_shapes[i]);
    }
    REQUIRE(tconv_out.size() == 6);
    const std::size_t want_tch[6] = {512, 256, 128, 64, 32, 3};
    for (int i = 0; i < 6; ++i) {
        CHECK(tconv_out[i].h == 8u << i);
        CHECK(tconv_out[i].c == want_tch[i]);
    }
}

TEST_CASE("encode and decode round trip shapes at every configured size") {
    for (std::size_t side : {8u, 16u, 64u}) {
        VaeConfig cfg;
        cfg.image_h = cfg.image_w = side;
        cfg.latent_dim = 3;
        VaeModel model(cfg);
        nn::Tensor img = random_image(side, side, side);
        LatentStats s = model.encode(img);
        REQUIRE(s.u.size() == 3);
        REQUIRE(s.log_var.size() == 3);
        for (double v : s.u) CHECK(std::isfinite(v));
        for (double v : s.log_var) CHECK(std::isfinite(v));
        nn::Tensor out = model.decode(s.u);
        CHECK(out.same_shape(img));
        for (double v : out.vec()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("encode is bitwise deterministic") {
    VaeModel model(small_cfg());
    nn::Tensor img = random_image(16, 16, 99);
    LatentStats a = model.encode(img);
    LatentStats b = model.encode(img);
    CHECK(a.u == b.u);
    CHECK(a.log_var == b.log_var);
}

TEST_CASE("full model gradients match finite differences at 16x16") {
    VaeConfig cfg = small_cfg();
    VaeModel model(cfg);
    const std::size_t bsz = 4;
    nn::Tensor x(bsz, 16, 16, 3);
    Rng rng(31);
    for (auto& v : x.vec()) v = rng.uniform();
    std::vector<double> noise(bsz * cfg.latent_dim);
    for (auto& e : noise) e = rng.normal();

    auto loss = [&]() { return batch_grads(model, x, noise); };
    loss();

    std::vector<nn::ParamRef> params = model.encoder().params();
    for (auto& p : model.decoder().params()) params.push_back(p);
    std::uint64_t salt = 0;
    for (auto& p : params) {
        std::vector<double> analytic = *p.grad;
        for (auto j : testsupport::sample_indices(p.value->size(), 8, 1000 + salt)) {
            const double g_fd = testsupport::fd_grad(loss, &(*p.value)[j]);
            CAPTURE(p.name);
            CAPTURE(j);
            CHECK(testsupport::rel_err(analytic[j], g_fd) < 1e-4);
        }
        ++salt;
    }
}

TEST_CASE("training overfits a single image") {
    VaeConfig cfg = small_cfg();
    cfg.epochs = 200;
    cfg.lr = 5e-3;
    VaeModel model(cfg);
    std::vector<nn::Tensor> corpus{random_image(16, 16, 7)};
    TrainResult r = train(model, corpus, 0, cfg);
    REQUIRE(r.log.epoch_loss.size() == 200);
    CHECK(r.log.epoch_loss.back() < 0.1 * r.log.epoch_loss.front());
    CHECK(r.zs.empty());
    CHECK(r.zo.size() == 2);
}

TEST_CASE("training is bitwise repeatable for a fixed seed") {
    VaeConfig cfg = small_cfg();
    cfg.epochs = 5;
    cfg.batch = 4;
    std::vector<nn::Tensor> corpus;
    for (int i = 0; i < 6; ++i) corpus.push_back(random_image(16, 16, 300 + i));

    VaeModel m1(cfg);
    TrainResult r1 = train(m1, corpus, 5, cfg);
    VaeModel m2(cfg);
    TrainResult r2 = train(m2, corpus, 5, cfg);
    CHECK(r1.log.epoch_loss == r2.log.epoch_loss);
    REQUIRE(r1.zs.size() == r2.zs.size());
    for (std::size_t i = 0; i < r1.zs.size(); ++i) CHECK(r1.zs[i] == r2.zs[i]);
    CHECK(r1.zo == r2.zo);
}

TEST_CASE("epoch losses trend downward on a small corpus") {
    VaeConfig cfg = small_cfg();
    cfg.epochs = 30;
    cfg.batch = 8;
    cfg.lr = 2e-3;
    std::vector<nn::Tensor> corpus;
    for (int i = 0; i < 16; ++i) corpus.push_back(random_image(16, 16, 500 + i));
    VaeModel model(cfg);
    TrainResult r = train(model, corpus, 0, cfg);
    CHECK(r.log.epoch_loss.back() < r.log.epoch_loss.front());
    CHECK(r.zs.size() == 15);
}

TEST_CASE("checkpoint round trip preserves the model bit for bit") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "invabc_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    VaeConfig cfg = small_cfg();
    cfg.epochs = 3;
    cfg.batch = 2;
    VaeModel model(cfg);
    std::vector<nn::Tensor> corpus;
    for (int i = 0; i < 4; ++i) corpus.push_back(random_image(16, 16, 700 + i));
    train(model, corpus, 0, cfg);
    save_checkpoint(model, path);

    VaeModel loaded = load_checkpoint(path, cfg);
    nn::Tensor img = random_image(16, 16, 777);
    LatentStats a = model.encode(img);
    LatentStats b = loaded.encode(img);
    CHECK(a.u == b.u);
    CHECK(a.log_var == b.log_var);

    VaeConfig other = cfg;
    other.latent_dim = 3;
    CHECK_THROWS_AS(load_checkpoint(path, other), IoError);

    FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f);
    std::fputc('X', f);
    std::fclose(f);
    CHECK_THROWS_AS(load_checkpoint(path, cfg), IoError);
    fs::remove_all(dir);
}
