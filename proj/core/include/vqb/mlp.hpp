#pragma once

#include <span>
#include <vector>

#include "vqb/matrix.hpp"
#include "vqb/rng.hpp"

namespace vqb {

enum class Activation { Identity, Tanh };

struct Layer {
    Matrix weight;             // d_in x d_out
    std::vector<double> bias;  // d_out
    Activation act = Activation::Identity;
};

// Small dense stack with hand-written gradients; serves as encoder, decoder
// and classifier at desk scale.
struct MlpStack {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().weight.rows(); }
    std::size_t output_dim() const { return layers.back().weight.cols(); }
};

struct MlpCache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> outs;    // post-activation output of each layer
};

struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
};

// Hidden layers use `hidden_act`, the final layer is linear. Weights are
// normal with 1/sqrt(fan_in) scale, biases zero.
MlpStack make_mlp(std::span<const std::size_t> dims, Activation hidden_act, Rng& rng);

Matrix mlp_forward(const MlpStack& stack, const Matrix& x, MlpCache* cache = nullptr);

// Returns the gradient w.r.t. the stack input; fills parameter gradients.
Matrix mlp_backward(const MlpStack& stack, const MlpCache& cache, const Matrix& grad_out,
                    MlpGrads& grads);

MlpGrads zero_grads(const MlpStack& stack);

void sgd_update(MlpStack& stack, const MlpGrads& grads, double lr);

}  // namespace vqb
