#pragma once

#include <vector>

#include "vqb/matrix.hpp"

namespace vqb {

// Per-dimension batch normalization applied to the latent immediately before
// quantization. Keeps the magnitude ratio between encoder outputs and
// codewords under control.
struct BatchNormState {
    std::vector<double> gain;
    std::vector<double> bias;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t dim)
        : gain(dim, 1.0), bias(dim, 0.0), running_mean(dim, 0.0), running_var(dim, 1.0) {}

    std::size_t dim() const { return gain.size(); }
};

// Forward quantities needed by the backward pass.
struct BatchNormCache {
    Matrix x_hat;                 // normalized input
    std::vector<double> inv_std;  // 1/sqrt(var + eps) per dimension
};

// Training mode normalizes by batch statistics and folds them into the
// running estimates; eval mode normalizes by the running estimates. Training
// mode requires n >= 2.
Matrix batchnorm_forward(const Matrix& x, BatchNormState& state, bool training,
                         BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Matrix grad_in;
    std::vector<double> grad_gain;
    std::vector<double> grad_bias;
};

// Exact gradients of the training-mode forward mapping, batch statistics
// included.
BatchNormGrads batchnorm_backward(const Matrix& grad_out, const BatchNormState& state,
                                  const BatchNormCache& cache);

}  // namespace vqb
