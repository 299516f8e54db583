#include "invabc/layers.hpp"

#include "invabc/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>

namespace invabc::nn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;
using MapCRow = Eigen::Map<const Eigen::RowVectorXd>;

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(std::vector<double>& v, Rng& rng, double limit) {
    for (auto& x : v) x = rng.uniform(-limit, limit);
}

} // namespace

SamePad same_pad(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw,
                 std::size_t stride) {
    SamePad p;
    p.out_h = (in_h + stride - 1) / stride;
    p.out_w = (in_w + stride - 1) / stride;
    auto lead = [stride](std::size_t out, std::size_t in, std::size_t k) -> std::size_t {
        const auto need = static_cast<std::ptrdiff_t>((out - 1) * stride + k) -
                          static_cast<std::ptrdiff_t>(in);
        return need > 0 ? static_cast<std::size_t>(need) / 2 : 0;
    };
    p.pad_top = lead(p.out_h, in_h, kh);
    p.pad_left = lead(p.out_w, in_w, kw);
    return p;
}

void im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride,
            const SamePad& p, std::vector<double>& cols) {
    const std::size_t N = x.n(), H = x.h(), W = x.w(), C = x.c();
    const std::size_t width = kh * kw * C;
    cols.assign(N * p.out_h * p.out_w * width, 0.0);
    const double* src = x.data();
    double* dst = cols.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t oh = 0; oh < p.out_h; ++oh)
            for (std::size_t ow = 0; ow < p.out_w; ++ow) {
                double* row = dst + ((n * p.out_h + oh) * p.out_w + ow) * width;
                const std::ptrdiff_t ih0 =
                    static_cast<std::ptrdiff_t>(oh * stride) - static_cast<std::ptrdiff_t>(p.pad_top);
                const std::ptrdiff_t iw0 =
                    static_cast<std::ptrdiff_t>(ow * stride) - static_cast<std::ptrdiff_t>(p.pad_left);
                for (std::size_t r = 0; r < kh; ++r) {
                    const std::ptrdiff_t ih = ih0 + static_cast<std::ptrdiff_t>(r);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t s = 0; s < kw; ++s) {
                        const std::ptrdiff_t iw = iw0 + static_cast<std::ptrdiff_t>(s);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                        std::memcpy(row + (r * kw + s) * C,
                                    src + ((n * H + static_cast<std::size_t>(ih)) * W +
                                           static_cast<std::size_t>(iw)) * C,
                                    C * sizeof(double));
                    }
                }
            }
}

void col2im(const std::vector<double>& cols, std::size_t kh, std::size_t kw, std::size_t stride,
            const SamePad& p, Tensor& x) {
    const std::size_t N = x.n(), H = x.h(), W = x.w(), C = x.c();
    const std::size_t width = kh * kw * C;
    if (cols.size() != N * p.out_h * p.out_w * width)
        throw ShapeError("col2im: column matrix size does not match geometry");
    x.fill(0.0);
    const double* src = cols.data();
    double* dst = x.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t oh = 0; oh < p.out_h; ++oh)
            for (std::size_t ow = 0; ow < p.out_w; ++ow) {
                const double* row = src + ((n * p.out_h + oh) * p.out_w + ow) * width;
                const std::ptrdiff_t ih0 =
                    static_cast<std::ptrdiff_t>(oh * stride) - static_cast<std::ptrdiff_t>(p.pad_top);
                const std::ptrdiff_t iw0 =
                    static_cast<std::ptrdiff_t>(ow * stride) - static_cast<std::ptrdiff_t>(p.pad_left);
                for (std::size_t r = 0; r < kh; ++r) {
                    const std::ptrdiff_t ih = ih0 + static_cast<std::ptrdiff_t>(r);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t s = 0; s < kw; ++s) {
                        const std::ptrdiff_t iw = iw0 + static_cast<std::ptrdiff_t>(s);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                        double* cell = dst + ((n * H + static_cast<std::size_t>(ih)) * W +
                                              static_cast<std::size_t>(iw)) * C;
                        const double* patch = row + (r * kw + s) * C;
                        for (std::size_t c = 0; c < C; ++c) cell[c] += patch[c];
                    }
                }
            }
}

Dense::Dense(std::size_t in_dim, std::size_t out_dim)
    : w(in_dim * out_dim, 0.0), b(out_dim, 0.0), dw(in_dim * out_dim, 0.0), db(out_dim, 0.0),
      in_(in_dim), out_(out_dim) {}

Tensor Dense::forward(const Tensor& x, bool) {
    if (x.h() != 1 || x.w() != 1 || x.c() != in_)
        throw ShapeError("dense: expected (N,1,1," + std::to_string(in_) + "), got " + x.shape_str());
    x_ = x;
    Tensor y(x.n(), 1, 1, out_);
    MapCM X(x.data(), x.n(), in_);
    MapCM W(w.data(), in_, out_);
    MapM Y(y.data(), x.n(), out_);
    Y.noalias() = X * W;
    Y.rowwise() += MapCRow(b.data(), out_);
    return y;
}

Tensor Dense::backward(const Tensor& dy) {
    if (dy.n() != x_.n() || dy.c() != out_)
        throw ShapeError("dense backward: gradient shape " + dy.shape_str());
    MapCM dY(dy.data(), dy.n(), out_);
    MapCM X(x_.data(), x_.n(), in_);
    MapM dW(dw.data(), in_, out_);
    dW.noalias() += X.transpose() * dY;
    // fixed-order accumulation keeps repeat runs bitwise identical
    const double* dyd = dy.data();
    for (std::size_t i = 0; i < dy.n(); ++i)
        for (std::size_t j = 0; j < out_; ++j) db[j] += dyd[i * out_ + j];
    Tensor dx(x_.n(), 1, 1, in_);
    MapM dX(dx.data(), x_.n(), in_);
    MapCM W(w.data(), in_, out_);
    dX.noalias() = dY * W.transpose();
    return dx;
}

Shape3 Dense::output_shape(const Shape3& in) const {
    if (in.h != 1 || in.w != 1 || in.c != in_)
        throw ShapeError("dense: bad input shape");
    return {1, 1, out_};
}

std::vector<double> Dense::meta() const {
    return {static_cast<double>(in_), static_cast<double>(out_)};
}

std::vector<ParamRef> Dense::params() {
    return {{"w", &w, &dw}, {"b", &b, &db}};
}

void Dense::init(Rng& rng) {
    fill_uniform(w, rng, glorot_limit(in_, out_));
    std::fill(b.begin(), b.end(), 0.0);
}

Conv2d::Conv2d(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out,
               std::size_t stride)
    : w(kh * kw * c_in * c_out, 0.0), b(c_out, 0.0), dw(w.size(), 0.0), db(c_out, 0.0),
      kh_(kh), kw_(kw), cin_(c_in), cout_(c_out), stride_(stride) {}

Tensor Conv2d::forward(const Tensor& x, bool) {
    if (x.c() != cin_)
        throw ShapeError("conv: input has " + std::to_string(x.c()) + " channels, filter expects " +
                         std::to_string(cin_));
    in_dims_ = x.dims();
    pad_ = same_pad(x.h(), x.w(), kh_, kw_, stride_);
    im2col(x, kh_, kw_, stride_, pad_, cols_);
    const std::size_t rows = x.n() * pad_.out_h * pad_.out_w;
    const std::size_t width = kh_ * kw_ * cin_;
    Tensor y(x.n(), pad_.out_h, pad_.out_w, cout_);
    MapCM A(cols_.data(), rows, width);
    MapCM W(w.data(), width, cout_);
    MapM Y(y.data(), rows, cout_);
    Y.noalias() = A * W;
    Y.rowwise() += MapCRow(b.data(), cout_);
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const std::size_t rows = in_dims_[0] * pad_.out_h * pad_.out_w;
    const std::size_t width = kh_ * kw_ * cin_;
    if (dy.n() != in_dims_[0] || dy.h() != pad_.out_h || dy.w() != pad_.out_w || dy.c() != cout_)
        throw ShapeError("conv backward: gradient shape " + dy.shape_str());
    MapCM dY(dy.data(), rows, cout_);
    MapCM A(cols_.data(), rows, width);
    MapM dW(dw.data(), width, cout_);
    dW.noalias() += A.transpose() * dY;
    // fixed-order accumulation keeps repeat runs bitwise identical
    const double* dyd = dy.data();
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cout_; ++j) db[j] += dyd[i * cout_ + j];
    std::vector<double> dcols(rows * width);
    MapM dA(dcols.data(), rows, width);
    MapCM W(w.data(), width, cout_);
    dA.noalias() = dY * W.transpose();
    Tensor dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3]);
    col2im(dcols, kh_, kw_, stride_, pad_, dx);
    return dx;
}

Shape3 Conv2d::output_shape(const Shape3& in) const {
    if (in.c != cin_) throw ShapeError("conv: bad input channel count");
    const SamePad p = same_pad(in.h, in.w, kh_, kw_, stride_);
    return {p.out_h, p.out_w, cout_};
}

std::vector<double> Conv2d::meta() const {
    return {static_cast<double>(kh_), static_cast<double>(kw_), static_cast<double>(cin_),
            static_cast<double>(cout_), static_cast<double>(stride_)};
}

std::vector<ParamRef> Conv2d::params() {
    return {{"w", &w, &dw}, {"b", &b, &db}};
}

void Conv2d::init(Rng& rng) {
    fill_uniform(w, rng, glorot_limit(kh_ * kw_ * cin_, kh_ * kw_ * cout_));
    std::fill(b.begin(), b.end(), 0.0);
}

ConvTranspose2d::ConvTranspose2d(std::size_t kh, std::size_t kw, std::size_t c_in,
                                 std::size_t c_out, std::size_t stride)
    : w(kh * kw * c_out * c_in, 0.0), b(c_out, 0.0), dw(w.size(), 0.0), db(c_out, 0.0),
      kh_(kh), kw_(kw), cin_(c_in), cout_(c_out), stride_(stride) {}

Tensor ConvTranspose2d::forward(const Tensor& x, bool) {
    if (x.c() != cin_)
        throw ShapeError("conv_transpose: input has " + std::to_string(x.c()) +
                         " channels, filter expects " + std::to_string(cin_));
    in_dims_ = x.dims();
    x_ = x;
    const std::size_t out_h = x.h() * stride_, out_w = x.w() * stride_;
    pad_ = same_pad(out_h, out_w, kh_, kw_, stride_);
    const std::size_t rows = x.n() * x.h() * x.w();
    const std::size_t width = kh_ * kw_ * cout_;
    std::vector<double> vcols(rows * width);
    MapCM U(x.data(), rows, cin_);
    MapCM W(w.data(), width, cin_);
    MapM V(vcols.data(), rows, width);
    V.noalias() = U * W.transpose();
    Tensor y(x.n(), out_h, out_w, cout_);
    col2im(vcols, kh_, kw_, stride_, pad_, y);
    double* yd = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) yd[i] += b[i % cout_];
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
    if (dy.n() != in_dims_[0] || dy.h() != in_dims_[1] * stride_ ||
        dy.w() != in_dims_[2] * stride_ || dy.c() != cout_)
        throw ShapeError("conv_transpose backward: gradient shape " + dy.shape_str());
    im2col(dy, kh_, kw_, stride_, pad_, cols_);
    const std::size_t rows = in_dims_[0] * in_dims_[1] * in_dims_[2];
    const std::size_t width = kh_ * kw_ * cout_;
    MapCM D(cols_.data(), rows, width);
    MapCM W(w.data(), width, cin_);
    Tensor dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3]);
    MapM dU(dx.data(), rows, cin_);
    dU.noalias() = D * W;
    MapCM U(x_.data(), rows, cin_);
    MapM dW(dw.data(), width, cin_);
    dW.noalias() += D.transpose() * U;
    const double* dyd = dy.data();
    for (std::size_t i = 0; i < dy.size(); ++i) db[i % cout_] += dyd[i];
    return dx;
}

Shape3 ConvTranspose2d::output_shape(const Shape3& in) const {
    if (in.c != cin_) throw ShapeError("conv_transpose: bad input channel count");
    return {in.h * stride_, in.w * stride_, cout_};
}

std::vector<double> ConvTranspose2d::meta() const {
    return {static_cast<double>(kh_), static_cast<double>(kw_), static_cast<double>(cin_),
            static_cast<double>(cout_), static_cast<double>(stride_)};
}

std::vector<ParamRef> ConvTranspose2d::params() {
    return {{"w", &w, &dw}, {"b", &b, &db}};
}

void ConvTranspose2d::init(Rng& rng) {
    fill_uniform(w, rng, glorot_limit(kh_ * kw_ * cin_, kh_ * kw_ * cout_));
    std::fill(b.begin(), b.end(), 0.0);
}

BatchNorm::BatchNorm(std::size_t channels, double eps, double momentum)
    : gamma(channels, 1.0), beta(channels, 0.0), dgamma(channels, 0.0), dbeta(channels, 0.0),
      running_mean(channels, 0.0), running_var(channels, 1.0), c_(channels), eps_(eps),
      momentum_(momentum), inv_std_(channels, 0.0) {
    if (eps < 0) throw ConfigError("batch_norm: negative eps");
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
    if (x.c() != c_) throw ShapeError("batch_norm: channel mismatch " + x.shape_str());
    const std::size_t M = x.n() * x.h() * x.w();
    Tensor y(x.n(), x.h(), x.w(), x.c());
    const double* xd = x.data();
    double* yd = y.data();
    if (!training) {
        std::vector<double> scale(c_), shift(c_);
        for (std::size_t c = 0; c < c_; ++c) {
            scale[c] = gamma[c] / std::sqrt(running_var[c] + eps_);
            shift[c] = beta[c] - scale[c] * running_mean[c];
        }
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = scale[i % c_] * xd[i] + shift[i % c_];
        trained_forward_ = false;
        return y;
    }
    if (M == 1 && eps_ == 0.0)
        throw NumericError("batch_norm: single-element batch with eps 0 divides by zero");
    std::vector<double> mu(c_, 0.0), var(c_, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) mu[i % c_] += xd[i];
    for (auto& m : mu) m /= static_cast<double>(M);
    centered_ = x;
    double* cd = centered_.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        cd[i] -= mu[i % c_];
        var[i % c_] += cd[i] * cd[i];
    }
    for (std::size_t c = 0; c < c_; ++c) {
        var[c] /= static_cast<double>(M);
        inv_std_[c] = 1.0 / std::sqrt(var[c] + eps_);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t c = i % c_;
        yd[i] = gamma[c] * cd[i] * inv_std_[c] + beta[c];
    }
    for (std::size_t c = 0; c < c_; ++c) {
        running_mean[c] = momentum_ * running_mean[c] + (1.0 - momentum_) * mu[c];
        running_var[c] = momentum_ * running_var[c] + (1.0 - momentum_) * var[c];
    }
    trained_forward_ = true;
    return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
    if (!trained_forward_)
        throw NumericError("batch_norm: backward requires a preceding training-mode forward");
    check_same_shape(dy, centered_, "batch_norm backward");
    const std::size_t M = dy.n() * dy.h() * dy.w();
    const double* dyd = dy.data();
    const double* cd = centered_.data();
    std::vector<double> s1(c_, 0.0), s2(c_, 0.0);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const std::size_t c = i % c_;
        const double xhat = cd[i] * inv_std_[c];
        s1[c] += dyd[i];
        s2[c] += dyd[i] * xhat;
    }
    for (std::size_t c = 0; c < c_; ++c) {
        dbeta[c] += s1[c];
        dgamma[c] += s2[c];
    }
    Tensor dx(dy.n(), dy.h(), dy.w(), dy.c());
    double* dxd = dx.data();
    const double inv_m = 1.0 / static_cast<double>(M);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const std::size_t c = i % c_;
        const double xhat = cd[i] * inv_std_[c];
        dxd[i] = gamma[c] * inv_std_[c] * (dyd[i] - inv_m * (s1[c] + xhat * s2[c]));
    }
    return dx;
}

std::vector<double> BatchNorm::meta() const {
    return {static_cast<double>(c_), eps_, momentum_};
}

std::vector<ParamRef> BatchNorm::params() {
    return {{"gamma", &gamma, &dgamma}, {"beta", &beta, &dbeta}};
}

std::vector<StateRef> BatchNorm::state() {
    return {{"running_mean", &running_mean}, {"running_var", &running_var}};
}

Activation::Activation(Act act, double lambda) : act_(act), lambda_(lambda) {
    if (act == Act::LRelu && (lambda <= 0.0 || lambda >= 1.0))
        throw ConfigError("activation: leaky slope must lie in (0,1)");
}

Tensor Activation::forward(const Tensor& x, bool) {
    Tensor y(x.n(), x.h(), x.w(), x.c());
    const double* xd = x.data();
    double* yd = y.data();
    switch (act_) {
    case Act::None:
        y = x;
        break;
    case Act::Relu:
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
        cache_ = x;
        break;
    case Act::LRelu:
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = xd[i] > 0.0 ? xd[i] : lambda_ * xd[i];
        cache_ = x;
        break;
    case Act::Sigmoid:
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = 1.0 / (1.0 + std::exp(-xd[i]));
        cache_ = y;
        break;
    }
    return y;
}

Tensor Activation::backward(const Tensor& dy) {
    Tensor dx(dy.n(), dy.h(), dy.w(), dy.c());
    const double* dyd = dy.data();
    double* dxd = dx.data();
    const double* cd = cache_.data();
    switch (act_) {
    case Act::None:
        dx = dy;
        break;
    case Act::Relu:
        check_same_shape(dy, cache_, "activation backward");
        for (std::size_t i = 0; i < dy.size(); ++i) dxd[i] = cd[i] > 0.0 ? dyd[i] : 0.0;
        break;
    case Act::LRelu:
        check_same_shape(dy, cache_, "activation backward");
        for (std::size_t i = 0; i < dy.size(); ++i) dxd[i] = cd[i] > 0.0 ? dyd[i] : lambda_ * dyd[i];
        break;
    case Act::Sigmoid:
        check_same_shape(dy, cache_, "activation backward");
        for (std::size_t i = 0; i < dy.size(); ++i) dxd[i] = dyd[i] * cd[i] * (1.0 - cd[i]);
        break;
    }
    return dx;
}

std::vector<double> Activation::meta() const {
    return {static_cast<double>(static_cast<int>(act_)), lambda_};
}

Tensor Flatten::forward(const Tensor& x, bool) {
    in_dims_ = x.dims();
    Tensor y(x.n(), 1, 1, x.item_size());
    y.vec() = x.vec();
    return y;
}

Tensor Flatten::backward(const Tensor& dy) {
    if (dy.n() != in_dims_[0] || dy.item_size() != in_dims_[1] * in_dims_[2] * in_dims_[3])
        throw ShapeError("flatten backward: gradient shape " + dy.shape_str());
    Tensor dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3]);
    dx.vec() = dy.vec();
    return dx;
}

Tensor Reshape::forward(const Tensor& x, bool) {
    if (x.item_size() != h_ * w_ * c_)
        throw ShapeError("reshape: cannot view " + x.shape_str() + " as (" + std::to_string(h_) +
                         "," + std::to_string(w_) + "," + std::to_string(c_) + ")");
    in_dims_ = x.dims();
    Tensor y(x.n(), h_, w_, c_);
    y.vec() = x.vec();
    return y;
}

Tensor Reshape::backward(const Tensor& dy) {
    if (dy.n() != in_dims_[0] || dy.item_size() != in_dims_[1] * in_dims_[2] * in_dims_[3])
        throw ShapeError("reshape backward: gradient shape " + dy.shape_str());
    Tensor dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3]);
    dx.vec() = dy.vec();
    return dx;
}

Shape3 Reshape::output_shape(const Shape3& in) const {
    if (in.count() != h_ * w_ * c_) throw ShapeError("reshape: element count mismatch");
    return {h_, w_, c_};
}

std::vector<double> Reshape::meta() const {
    return {static_cast<double>(h_), static_cast<double>(w_), static_cast<double>(c_)};
}

Tensor Network::forward(const Tensor& x, bool training) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur, training);
    return cur;
}

Tensor Network::backward(const Tensor& dy) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

void Network::init(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Rng rng(derive_seed(seed, {i}));
        layers_[i]->init(rng);
    }
}

void Network::zero_grad() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> out;
    for (auto& l : layers_)
        for (auto& p : l->params()) out.push_back(p);
    return out;
}

std::vector<StateRef> Network::state() {
    std::vector<StateRef> out;
    for (auto& l : layers_)
        for (auto& s : l->state()) out.push_back(s);
    return out;
}

Shape3 Network::output_shape(Shape3 in) const {
    for (const auto& l : layers_) in = l->output_shape(in);
    return in;
}

std::vector<Shape3> Network::layer_shapes(Shape3 in) const {
    std::vector<Shape3> shapes;
    shapes.reserve(layers_.size());
    for (const auto& l : layers_) {
        in = l->output_shape(in);
        shapes.push_back(in);
    }
    return shapes;
}

double dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    const double* ad = a.data();
    const double* bd = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += ad[i] * bd[i];
    return s;
}

} // namespace invabc::nn
