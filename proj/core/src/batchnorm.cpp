#include "vqb/batchnorm.hpp"

#include <cmath>

#include "vqb/check.hpp"

namespace vqb {

Matrix batchnorm_forward(const Matrix& x, BatchNormState& state, bool training,
                         BatchNormCache* cache) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    VQB_REQUIRE(d == state.dim(), "dimension mismatch in batchnorm_forward");
    VQB_REQUIRE(!training || n >= 2, "training-mode batch norm needs n >= 2");

    std::vector<double> mean(d, 0.0);
    std::vector<double> var(d, 0.0);
    if (training) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
        for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double c = x(i, j) - mean[j];
                var[j] += c * c;
            }
        for (std::size_t j = 0; j < d; ++j) var[j] /= static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            state.running_mean[j] =
                (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
            state.running_var[j] =
                (1.0 - state.momentum) * state.running_var[j] + state.momentum * var[j];
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<double> inv_std(d);
    for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + state.eps);

    Matrix x_hat(n, d);
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            x_hat(i, j) = (x(i, j) - mean[j]) * inv_std[j];
            out(i, j) = state.gain[j] * x_hat(i, j) + state.bias[j];
        }

    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Matrix& grad_out, const BatchNormState& state,
                                  const BatchNormCache& cache) {
    VQB_REQUIRE(!cache.x_hat.empty() && cache.inv_std.size() == cache.x_hat.cols(),
                "missing forward cache in batchnorm_backward");
    VQB_REQUIRE(grad_out.same_shape(cache.x_hat), "shape mismatch in batchnorm_backward");

    const std::size_t n = grad_out.rows();
    const std::size_t d = grad_out.cols();
    const double fn = static_cast<double>(n);

    BatchNormGrads grads;
    grads.grad_in = Matrix(n, d);
    grads.grad_gain.assign(d, 0.0);
    grads.grad_bias.assign(d, 0.0);

    // Per dimension: dx = gain*inv_std/n * (n*g - sum(g) - x_hat*sum(g*x_hat))
    std::vector<double> sum_g(d, 0.0);
    std::vector<double> sum_gx(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            sum_g[j] += grad_out(i, j);
            sum_gx[j] += grad_out(i, j) * cache.x_hat(i, j);
        }
    for (std::size_t j = 0; j < d; ++j) {
        grads.grad_bias[j] = sum_g[j];
        grads.grad_gain[j] = sum_gx[j];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double scaled = state.gain[j] * cache.inv_std[j] / fn;
            grads.grad_in(i, j) = scaled * (fn * grad_out(i, j) - sum_g[j] -
                                            cache.x_hat(i, j) * sum_gx[j]);
        }
    return grads;
}

}  // namespace vqb
