#pragma once

#include "sohcast/tensor.hpp"

namespace sohcast {

// Raw layer kernels shared by the autodiff graph and the sampling-only
// inference path. Shapes follow the layer stack: inputs are [T x C],
// conv kernels [K x W x C], dense weights [D x U].

// Valid (no padding) cross-correlation, output [(T-W+1) x K].
Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// Gradients of conv1d; any output pointer may be null to skip that input.
void conv1d_backward(const Tensor& input, const Tensor& kernels, const Tensor& out_grad,
                     Tensor* input_grad, Tensor* kernel_grad, Tensor* bias_grad);

// Mean over the temporal axis, [T x C] -> [C].
Tensor global_avg_pool(const Tensor& input);
void global_avg_pool_backward(const Tensor& input, const Tensor& out_grad,
                              Tensor* input_grad);

// Affine map input.weights + bias, [D] x [D x U] -> [U].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& out_grad,
                    Tensor* input_grad, Tensor* weight_grad, Tensor* bias_grad);

// Elementwise mu + softplus(rho) * noise; all shapes must match.
Tensor reparam_sample(const Tensor& mu, const Tensor& rho, const Tensor& noise);

double softplus(double x);
double sigmoid(double x);

}  // namespace sohcast
