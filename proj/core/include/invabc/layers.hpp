#pragma once

#include "invabc/rng.hpp"
#include "invabc/tensor.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace invabc::nn {

enum class Act : int { None = 0, Relu = 1, LRelu = 2, Sigmoid = 3 };

struct Shape3 {
    std::size_t h = 0, w = 0, c = 0;
    bool operator==(const Shape3&) const = default;
    std::size_t count() const { return h * w * c; }
};

struct SamePad {
    std::size_t out_h = 0, out_w = 0;
    std::size_t pad_top = 0, pad_left = 0;
};

/// TF-style SAME geometry: out = ceil(in/stride); total padding per axis is
/// max((out-1)*stride + k - in, 0), with the smaller half leading.
SamePad same_pad(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw,
                 std::size_t stride);

/// Lowers stride-s patches of x (zero padded per p) into a row-major matrix
/// of shape (n*out_h*out_w, kh*kw*c); row index enumerates (n, oh, ow),
/// column index enumerates (r, s, c).
void im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride,
            const SamePad& p, std::vector<double>& cols);

/// Adjoint of im2col: zero-fills x, then scatter-adds every patch entry back
/// to its source element. x must be pre-sized to the target shape.
void col2im(const std::vector<double>& cols, std::size_t kh, std::size_t kw, std::size_t stride,
            const SamePad& p, Tensor& x);

struct ParamRef {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

struct StateRef {
    std::string name;
    std::vector<double>* value;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual Shape3 output_shape(const Shape3& in) const = 0;
    virtual std::string kind() const = 0;
    /// Numeric descriptor (sizes, strides, activation tags) appended after
    /// the kind; used by the checkpoint format to validate architecture.
    virtual std::vector<double> meta() const { return {}; }
    virtual std::vector<ParamRef> params() { return {}; }
    /// Non-trained persistent values (batch-norm running statistics).
    virtual std::vector<StateRef> state() { return {}; }
    virtual void init(Rng&) {}
};

class Dense : public Layer {
public:
    Dense(std::size_t in_dim, std::size_t out_dim);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override;
    std::string kind() const override { return "dense"; }
    std::vector<double> meta() const override;
    std::vector<ParamRef> params() override;
    void init(Rng& rng) override;

    std::size_t in_dim() const { return in_; }
    std::size_t out_dim() const { return out_; }
    std::vector<double> w, b, dw, db;

private:
    std::size_t in_, out_;
    Tensor x_;
};

class Conv2d : public Layer {
public:
    Conv2d(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out, std::size_t stride);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override;
    std::string kind() const override { return "conv"; }
    std::vector<double> meta() const override;
    std::vector<ParamRef> params() override;
    void init(Rng& rng) override;

    /// Filter in (kh, kw, c_in, c_out) order, flattened row-major.
    std::vector<double> w, b, dw, db;

private:
    std::size_t kh_, kw_, cin_, cout_, stride_;
    std::array<std::size_t, 4> in_dims_{};
    SamePad pad_{};
    std::vector<double> cols_;
};

/// Transposed convolution: the linear adjoint of a Conv2d with filter
/// (kh, kw, c_out, c_in), upsampling spatial extent by the stride. The filter
/// is stored in the conv orientation, so c_out here is the produced channel
/// count and c_in the input channel count, matching the (kh,kw,produced,input)
/// shape convention.
class ConvTranspose2d : public Layer {
public:
    ConvTranspose2d(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out,
                    std::size_t stride);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override;
    std::string kind() const override { return "conv_transpose"; }
    std::vector<double> meta() const override;
    std::vector<ParamRef> params() override;
    void init(Rng& rng) override;

    /// Filter laid out as (kh, kw, c_out, c_in) row-major; bias has c_out.
    std::vector<double> w, b, dw, db;

private:
    std::size_t kh_, kw_, cin_, cout_, stride_;
    std::array<std::size_t, 4> in_dims_{};
    SamePad pad_{};
    Tensor x_;
    std::vector<double> cols_;
};

class BatchNorm : public Layer {
public:
    BatchNorm(std::size_t channels, double eps = 1e-5, double momentum = 0.99);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }
    std::string kind() const override { return "batch_norm"; }
    std::vector<double> meta() const override;
    std::vector<ParamRef> params() override;
    std::vector<StateRef> state() override;
    void init(Rng&) override {}

    std::vector<double> gamma, beta, dgamma, dbeta;
    std::vector<double> running_mean, running_var;

private:
    std::size_t c_;
    double eps_, momentum_;
    bool trained_forward_ = false;
    Tensor centered_;
    std::vector<double> inv_std_;
};

class Activation : public Layer {
public:
    Activation(Act act, double lambda = 0.2);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }
    std::string kind() const override { return "activation"; }
    std::vector<double> meta() const override;

    Act act() const { return act_; }

private:
    Act act_;
    double lambda_;
    Tensor cache_;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return {1, 1, in.count()}; }
    std::string kind() const override { return "flatten"; }

private:
    std::array<std::size_t, 4> in_dims_{};
};

class Reshape : public Layer {
public:
    Reshape(std::size_t h, std::size_t w, std::size_t c) : h_(h), w_(w), c_(c) {}
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override;
    std::string kind() const override { return "reshape"; }
    std::vector<double> meta() const override;

private:
    std::size_t h_, w_, c_;
    std::array<std::size_t, 4> in_dims_{};
};

/// Feed-forward chain of layers with reverse-mode backward.
class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& dy);

    void init(std::uint64_t seed);
    void zero_grad();

    std::vector<ParamRef> params();
    std::vector<StateRef> state();

    Shape3 output_shape(Shape3 in) const;
    /// Shape after every layer, in order.
    std::vector<Shape3> layer_shapes(Shape3 in) const;

    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Sum of elementwise products; the inner product used by adjointness checks.
double dot(const Tensor& a, const Tensor& b);

} // namespace invabc::nn
