#include "sohcast/graph.hpp"

#include <cmath>
#include <unordered_set>

#include "sohcast/error.hpp"
#include "sohcast/tensor_ops.hpp"

namespace sohcast {

namespace {

NodePtr make_node(Tensor value, const char* op, std::vector<NodePtr> parents,
                  std::function<void(DiffNode&)> backprop) {
    auto n = std::make_shared<DiffNode>();
    n->value = std::move(value);
    n->grad = Tensor(n->value.shape());
    n->op = op;
    for (const auto& p : parents) n->requires_grad |= p->requires_grad;
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

// Elementwise op with per-element local derivatives w.r.t. each parent.
template <typename Fwd, typename Bwd>
NodePtr binary_elementwise(const char* op, const NodePtr& a, const NodePtr& b,
                           Fwd fwd, Bwd bwd) {
    require_same_shape(a->value, b->value, op);
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) fwd(i, a->value[i], b->value[i], out[i]);
    return make_node(std::move(out), op, {a, b}, [bwd](DiffNode& n) {
        DiffNode& pa = *n.parents[0];
        DiffNode& pb = *n.parents[1];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double da = 0.0, db = 0.0;
            bwd(i, pa.value[i], pb.value[i], n.value[i], da, db);
            if (pa.requires_grad) pa.grad[i] += n.grad[i] * da;
            if (pb.requires_grad) pb.grad[i] += n.grad[i] * db;
        }
    });
}

template <typename Fwd, typename Bwd>
NodePtr unary_elementwise(const char* op, const NodePtr& a, Fwd fwd, Bwd bwd) {
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a->value[i]);
    return make_node(std::move(out), op, {a}, [bwd](DiffNode& n) {
        DiffNode& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            pa.grad[i] += n.grad[i] * bwd(pa.value[i], n.value[i]);
    });
}

}  // namespace

namespace ad {

NodePtr constant(Tensor v) {
    auto n = std::make_shared<DiffNode>();
    n->value = std::move(v);
    n->grad = Tensor(n->value.shape());
    return n;
}

NodePtr parameter(Tensor v) {
    auto n = constant(std::move(v));
    n->requires_grad = true;
    n->op = "param";
    return n;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        "add", a, b, [](std::size_t, double x, double y, double& o) { o = x + y; },
        [](std::size_t, double, double, double, double& da, double& db) {
            da = 1.0;
            db = 1.0;
        });
}

NodePtr add(const NodePtr& a, double c) {
    return unary_elementwise(
        "add_c", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        "sub", a, b, [](std::size_t, double x, double y, double& o) { o = x - y; },
        [](std::size_t, double, double, double, double& da, double& db) {
            da = 1.0;
            db = -1.0;
        });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        "mul", a, b, [](std::size_t, double x, double y, double& o) { o = x * y; },
        [](std::size_t, double x, double y, double, double& da, double& db) {
            da = y;
            db = x;
        });
}

NodePtr mul(const NodePtr& a, double c) {
    return unary_elementwise(
        "mul_c", a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        "div", a, b, [](std::size_t, double x, double y, double& o) { o = x / y; },
        [](std::size_t, double, double y, double o, double& da, double& db) {
            da = 1.0 / y;
            db = -o / y;
        });
}

NodePtr neg(const NodePtr& a) {
    return unary_elementwise(
        "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

NodePtr exp(const NodePtr& a) {
    return unary_elementwise(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}

NodePtr log(const NodePtr& a) {
    return unary_elementwise(
        "log", a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

NodePtr relu(const NodePtr& a) {
    return unary_elementwise(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

NodePtr softplus(const NodePtr& a) {
    return unary_elementwise(
        "softplus", a, [](double x) { return sohcast::softplus(x); },
        [](double x, double) { return sigmoid(x); });
}

NodePtr square(const NodePtr& a) {
    return unary_elementwise(
        "square", a, [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

NodePtr abs(const NodePtr& a) {
    return unary_elementwise(
        "abs", a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

NodePtr sum(const NodePtr& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
    return make_node(Tensor::scalar(acc), "sum", {a}, [](DiffNode& n) {
        DiffNode& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        const double g = n.grad[0];
        for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
    });
}

NodePtr mean(const NodePtr& a) {
    if (a->value.size() == 0) throw DimensionError("mean over empty tensor");
    double acc = 0.0;
    for (std::size_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
    const double inv = 1.0 / static_cast<double>(a->value.size());
    return make_node(Tensor::scalar(acc * inv), "mean", {a}, [inv](DiffNode& n) {
        DiffNode& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        const double g = n.grad[0] * inv;
        for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
    });
}

NodePtr index(const NodePtr& a, std::size_t i) {
    if (i >= a->value.size()) {
        throw DimensionError("index " + std::to_string(i) + " out of range for " +
                             a->value.shape_str());
    }
    return make_node(Tensor::scalar(a->value[i]), "index", {a}, [i](DiffNode& n) {
        DiffNode& pa = *n.parents[0];
        if (pa.requires_grad) pa.grad[i] += n.grad[0];
    });
}

NodePtr conv1d(const NodePtr& input, const NodePtr& kernels, const NodePtr& bias) {
    Tensor out = conv1d_forward(input->value, kernels->value, bias->value);
    return make_node(std::move(out), "conv1d", {input, kernels, bias}, [](DiffNode& n) {
        DiffNode& in = *n.parents[0];
        DiffNode& ker = *n.parents[1];
        DiffNode& b = *n.parents[2];
        conv1d_backward(in.value, ker.value, n.grad,
                        in.requires_grad ? &in.grad : nullptr,
                        ker.requires_grad ? &ker.grad : nullptr,
                        b.requires_grad ? &b.grad : nullptr);
    });
}

NodePtr global_avg_pool(const NodePtr& input) {
    Tensor out = sohcast::global_avg_pool(input->value);
    return make_node(std::move(out), "gap", {input}, [](DiffNode& n) {
        DiffNode& in = *n.parents[0];
        global_avg_pool_backward(in.value, n.grad, in.requires_grad ? &in.grad : nullptr);
    });
}

NodePtr dense(const NodePtr& input, const NodePtr& weights, const NodePtr& bias) {
    Tensor out = dense_forward(input->value, weights->value, bias->value);
    return make_node(std::move(out), "dense", {input, weights, bias}, [](DiffNode& n) {
        DiffNode& in = *n.parents[0];
        DiffNode& w = *n.parents[1];
        DiffNode& b = *n.parents[2];
        dense_backward(in.value, w.value, n.grad, in.requires_grad ? &in.grad : nullptr,
                       w.requires_grad ? &w.grad : nullptr,
                       b.requires_grad ? &b.grad : nullptr);
    });
}

NodePtr reparam(const NodePtr& mu, const NodePtr& rho, Tensor noise) {
    Tensor out = reparam_sample(mu->value, rho->value, noise);
    return make_node(std::move(out), "reparam", {mu, rho},
                     [noise = std::move(noise)](DiffNode& n) {
                         DiffNode& m = *n.parents[0];
                         DiffNode& r = *n.parents[1];
                         for (std::size_t i = 0; i < n.grad.size(); ++i) {
                             if (m.requires_grad) m.grad[i] += n.grad[i];
                             if (r.requires_grad)
                                 r.grad[i] += n.grad[i] * noise[i] * sigmoid(r.value[i]);
                         }
                     });
}

}  // namespace ad

void backward(const NodePtr& root) {
    if (!root) throw ContractError("backward: null root");
    if (!root->value.is_scalar()) {
        throw ContractError("backward: root must be scalar, got " +
                            root->value.shape_str());
    }
    // Iterative post-order DFS for the topological order.
    std::vector<DiffNode*> order;
    std::unordered_set<DiffNode*> seen;
    std::vector<std::pair<DiffNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            DiffNode* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        DiffNode* n = *it;
        if (n->requires_grad && n->backprop) n->backprop(*n);
    }
}

}  // namespace sohcast
