#pragma once

#include <string>
#include <vector>

#include "sohcast/error.hpp"
#include "sohcast/tensor.hpp"

namespace sohcast {

// Bias-corrected Adam over a fixed list of parameter tensors. Accumulator
// shapes mirror the parameters; step advances by exactly one per update.
class AdamState {
  public:
    AdamState() = default;
    explicit AdamState(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                       double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    long step() const { return step_; }
    double learning_rate() const { return lr_; }

    // Updates params in place; names are used only in error messages.
    void update(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
                const std::vector<std::string>& names) {
        if (params.size() != grads.size()) {
            throw ContractError("adam: " + std::to_string(params.size()) + " params vs " +
                                std::to_string(grads.size()) + " grads");
        }
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(m_[i])) {
                throw DimensionError("adam: gradient shape " + grads[i]->shape_str() +
                                     " does not mirror parameter " + params[i]->shape_str());
            }
            if (!grads[i]->all_finite()) {
                throw NumericError("adam: non-finite gradient for parameter '" +
                                   (i < names.size() ? names[i] : std::to_string(i)) + "'");
            }
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = *grads[i];
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

  private:
    double lr_ = 0.01;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long step_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace sohcast
