#pragma once

#include "invabc/errors.hpp"
#include "invabc/layers.hpp"

#include <cmath>
#include <vector>

namespace invabc::nn {

/// Bias-corrected Adam over a fixed set of parameter tensors. The moment
/// buffers are keyed by position, so the same ParamRef list (same order,
/// same sizes) must be passed to every step() call.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (lr <= 0 || beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 || eps <= 0)
            throw ConfigError("adam: hyperparameters out of range");
    }

    void step(const std::vector<ParamRef>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.value->size(), 0.0);
                v_.emplace_back(p.value->size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed size");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& value = *params[i].value;
            const auto& grad = *params[i].grad;
            auto& m = m_[i];
            auto& v = v_[i];
            if (value.size() != m.size() || grad.size() != m.size())
                throw ShapeError("adam: tensor size changed between steps");
            for (std::size_t j = 0; j < value.size(); ++j) {
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
                const double mhat = m[j] / c1;
                const double vhat = v[j] / c2;
                value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    std::uint64_t steps() const { return t_; }
    double lr() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace invabc::nn
