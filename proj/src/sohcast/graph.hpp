#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sohcast/tensor.hpp"

namespace sohcast {

// Reverse-mode differentiation over tensor-valued nodes. Graphs are built
// per loss evaluation and freed afterwards; only the ops the layer stack
// needs are provided.
struct DiffNode {
    Tensor value;
    Tensor grad;  // same shape, zero until backward reaches the node
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<DiffNode>> parents;
    // Local-derivative closure: pulls this node's grad and accumulates into
    // the parents' grads.
    std::function<void(DiffNode&)> backprop;
};

using NodePtr = std::shared_ptr<DiffNode>;

namespace ad {

NodePtr constant(Tensor v);
NodePtr parameter(Tensor v);

// Elementwise, same-shape unless stated otherwise.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, double c);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, double c);
NodePtr div(const NodePtr& a, const NodePtr& b);
NodePtr neg(const NodePtr& a);
NodePtr exp(const NodePtr& a);
NodePtr log(const NodePtr& a);
NodePtr relu(const NodePtr& a);
NodePtr softplus(const NodePtr& a);
NodePtr square(const NodePtr& a);
NodePtr abs(const NodePtr& a);

// Reductions to scalar nodes (shape [1]).
NodePtr sum(const NodePtr& a);
NodePtr mean(const NodePtr& a);

// Scalar view of one element.
NodePtr index(const NodePtr& a, std::size_t i);

// Layer ops; shapes as in tensor_ops.hpp.
NodePtr conv1d(const NodePtr& input, const NodePtr& kernels, const NodePtr& bias);
NodePtr global_avg_pool(const NodePtr& input);
NodePtr dense(const NodePtr& input, const NodePtr& weights, const NodePtr& bias);

// mu + softplus(rho) * noise with fixed noise; differentiable in mu and rho.
NodePtr reparam(const NodePtr& mu, const NodePtr& rho, Tensor noise);

}  // namespace ad

// Populates gradients of every node reachable from a scalar root.
void backward(const NodePtr& root);

}  // namespace sohcast
