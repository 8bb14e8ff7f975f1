#include "sohcast/tensor_ops.hpp"

#include <cmath>

namespace sohcast {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(what) + ": expected rank " +
                             std::to_string(rank) + ", got shape " + t.shape_str());
    }
}

}  // namespace

double softplus(double x) {
    // log(1 + exp(x)) without overflow on either side
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require_rank(input, 2, "conv1d input");
    require_rank(kernels, 3, "conv1d kernels");
    const std::size_t T = input.dim(0), C = input.dim(1);
    const std::size_t K = kernels.dim(0), W = kernels.dim(1);
    if (kernels.dim(2) != C) {
        throw DimensionError("conv1d: input channels " + input.shape_str() +
                             " do not match kernels " + kernels.shape_str());
    }
    if (T < W) {
        throw DimensionError("conv1d: input length " + std::to_string(T) +
                             " shorter than kernel width " + std::to_string(W));
    }
    if (bias.size() != K) {
        throw DimensionError("conv1d: bias " + bias.shape_str() + " must have " +
                             std::to_string(K) + " entries");
    }

    const std::size_t L = T - W + 1;
    Tensor out({L, K});
    const double* in = input.data();
    const double* ker = kernels.data();
    double* o = out.data();
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            double acc = bias[k];
            const double* kk = ker + k * W * C;
            const double* xx = in + t * C;
            for (std::size_t wc = 0; wc < W * C; ++wc) acc += xx[wc] * kk[wc];
            o[t * K + k] = acc;
        }
    }
    return out;
}

void conv1d_backward(const Tensor& input, const Tensor& kernels, const Tensor& out_grad,
                     Tensor* input_grad, Tensor* kernel_grad, Tensor* bias_grad) {
    const std::size_t T = input.dim(0), C = input.dim(1);
    const std::size_t K = kernels.dim(0), W = kernels.dim(1);
    const std::size_t L = T - W + 1;
    const double* in = input.data();
    const double* ker = kernels.data();
    const double* og = out_grad.data();

    if (bias_grad) {
        double* bg = bias_grad->data();
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t k = 0; k < K; ++k) bg[k] += og[t * K + k];
    }
    if (kernel_grad) {
        double* kg = kernel_grad->data();
        for (std::size_t t = 0; t < L; ++t) {
            const double* xx = in + t * C;
            for (std::size_t k = 0; k < K; ++k) {
                const double g = og[t * K + k];
                if (g == 0.0) continue;
                double* kk = kg + k * W * C;
                for (std::size_t wc = 0; wc < W * C; ++wc) kk[wc] += g * xx[wc];
            }
        }
    }
    if (input_grad) {
        double* ig = input_grad->data();
        for (std::size_t t = 0; t < L; ++t) {
            double* xx = ig + t * C;
            for (std::size_t k = 0; k < K; ++k) {
                const double g = og[t * K + k];
                if (g == 0.0) continue;
                const double* kk = ker + k * W * C;
                for (std::size_t wc = 0; wc < W * C; ++wc) xx[wc] += g * kk[wc];
            }
        }
    }
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 2, "global_avg_pool input");
    const std::size_t T = input.dim(0), C = input.dim(1);
    if (T == 0) throw DimensionError("global_avg_pool: empty temporal axis");
    Tensor out({C});
    const double* in = input.data();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < C; ++c) out[c] += in[t * C + c];
    for (std::size_t c = 0; c < C; ++c) out[c] /= static_cast<double>(T);
    return out;
}

void global_avg_pool_backward(const Tensor& input, const Tensor& out_grad,
                              Tensor* input_grad) {
    if (!input_grad) return;
    const std::size_t T = input.dim(0), C = input.dim(1);
    const double inv = 1.0 / static_cast<double>(T);
    double* ig = input_grad->data();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < C; ++c) ig[t * C + c] += out_grad[c] * inv;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require_rank(weights, 2, "dense weights");
    const std::size_t D = weights.dim(0), U = weights.dim(1);
    if (input.size() != D) {
        throw DimensionError("dense: input " + input.shape_str() + " does not match weights " +
                             weights.shape_str());
    }
    if (bias.size() != U) {
        throw DimensionError("dense: bias " + bias.shape_str() + " must have " +
                             std::to_string(U) + " entries");
    }
    Tensor out({U});
    const double* in = input.data();
    const double* w = weights.data();
    for (std::size_t d = 0; d < D; ++d) {
        const double x = in[d];
        if (x == 0.0) continue;
        const double* row = w + d * U;
        for (std::size_t u = 0; u < U; ++u) out[u] += x * row[u];
    }
    for (std::size_t u = 0; u < U; ++u) out[u] += bias[u];
    return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& out_grad,
                    Tensor* input_grad, Tensor* weight_grad, Tensor* bias_grad) {
    const std::size_t D = weights.dim(0), U = weights.dim(1);
    const double* og = out_grad.data();
    if (bias_grad) {
        double* bg = bias_grad->data();
        for (std::size_t u = 0; u < U; ++u) bg[u] += og[u];
    }
    if (weight_grad) {
        double* wg = weight_grad->data();
        for (std::size_t d = 0; d < D; ++d) {
            const double x = input[d];
            if (x == 0.0) continue;
            double* row = wg + d * U;
            for (std::size_t u = 0; u < U; ++u) row[u] += x * og[u];
        }
    }
    if (input_grad) {
        const double* w = weights.data();
        double* ig = input_grad->data();
        for (std::size_t d = 0; d < D; ++d) {
            const double* row = w + d * U;
            double acc = 0.0;
            for (std::size_t u = 0; u < U; ++u) acc += row[u] * og[u];
            ig[d] += acc;
        }
    }
}

Tensor reparam_sample(const Tensor& mu, const Tensor& rho, const Tensor& noise) {
    require_same_shape(mu, rho, "reparam_sample");
    require_same_shape(mu, noise, "reparam_sample");
    Tensor out = mu;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += softplus(rho[i]) * noise[i];
    return out;
}

}  // namespace sohcast
