#include "vqb/mlp.hpp"

#include <cmath>

#include "vqb/check.hpp"

namespace vqb {

namespace {

void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::Identity) return;
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = std::tanh(m.data()[i]);
}

// Multiplies the upstream gradient by the activation derivative, expressed
// through the post-activation output (tanh' = 1 - y^2).
void backprop_activation(Matrix& grad, const Matrix& out, Activation act) {
    if (act == Activation::Identity) return;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double y = out.data()[i];
        grad.data()[i] *= 1.0 - y * y;
    }
}

}  // namespace

MlpStack make_mlp(std::span<const std::size_t> dims, Activation hidden_act, Rng& rng) {
    VQB_REQUIRE(dims.size() >= 2, "an MLP needs at least input and output dims");
    MlpStack stack;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weight = Matrix(dims[l], dims[l + 1]);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = scale * rng.normal();
        layer.bias.assign(dims[l + 1], 0.0);
        layer.act = (l + 2 < dims.size()) ? hidden_act : Activation::Identity;
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

Matrix mlp_forward(const MlpStack& stack, const Matrix& x, MlpCache* cache) {
    VQB_REQUIRE(!stack.layers.empty(), "empty MLP stack");
    VQB_REQUIRE(x.cols() == stack.input_dim(), "input dimension mismatch in mlp_forward");

    if (cache) {
        cache->inputs.clear();
        cache->outs.clear();
    }
    Matrix h = x;
    for (const Layer& layer : stack.layers) {
        if (cache) cache->inputs.push_back(h);
        Matrix z = matmul(h, layer.weight);
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias[j];
        apply_activation(z, layer.act);
        if (cache) cache->outs.push_back(z);
        h = std::move(z);
    }
    return h;
}

Matrix mlp_backward(const MlpStack& stack, const MlpCache& cache, const Matrix& grad_out,
                    MlpGrads& grads) {
    VQB_REQUIRE(cache.inputs.size() == stack.layers.size() &&
                    cache.outs.size() == stack.layers.size(),
                "forward cache missing in mlp_backward");
    VQB_REQUIRE(grads.weight.size() == stack.layers.size(), "grads not sized for stack");

    Matrix grad = grad_out;
    for (std::size_t l = stack.layers.size(); l-- > 0;) {
        const Layer& layer = stack.layers[l];
        backprop_activation(grad, cache.outs[l], layer.act);

        grads.weight[l] = matmul_at(cache.inputs[l], grad);
        auto& gb = grads.bias[l];
        gb.assign(layer.bias.size(), 0.0);
        for (std::size_t i = 0; i < grad.rows(); ++i)
            for (std::size_t j = 0; j < grad.cols(); ++j) gb[j] += grad(i, j);

        grad = matmul_bt(grad, layer.weight);
    }
    return grad;
}

MlpGrads zero_grads(const MlpStack& stack) {
    MlpGrads grads;
    for (const Layer& layer : stack.layers) {
        grads.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        grads.bias.emplace_back(layer.bias.size(), 0.0);
    }
    return grads;
}

void sgd_update(MlpStack& stack, const MlpGrads& grads, double lr) {
    VQB_REQUIRE(grads.weight.size() == stack.layers.size(), "grads not sized for stack");
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        Layer& layer = stack.layers[l];
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] -= lr * grads.weight[l].data()[i];
        for (std::size_t j = 0; j < layer.bias.size(); ++j)
            layer.bias[j] -= lr * grads.bias[l][j];
    }
}

}  // namespace vqb
