#include "vqb/losses.hpp"

#include <cmath>
#include <span>

#include "vqb/check.hpp"

namespace vqb {

namespace {

// log softmax denominator with max subtraction.
double log_sum_exp(std::span<const double> logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : logits) s += std::exp(v - mx);
    return mx + std::log(s);
}

}  // namespace

double recon_nll(const std::vector<std::int32_t>& targets, const Matrix& logits,
                 const DiscretizedLikelihoodHead& head) {
    const std::size_t n = logits.rows();
    VQB_REQUIRE(n > 0, "empty batch in recon_nll");
    VQB_REQUIRE(logits.cols() == head.logit_cols(), "logit shape mismatch in recon_nll");
    VQB_REQUIRE(targets.size() == n * head.dims, "target shape mismatch in recon_nll");

    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t dim = 0; dim < head.dims; ++dim) {
            const std::int32_t t = targets[i * head.dims + dim];
            VQB_REQUIRE(t >= 0 && static_cast<std::size_t>(t) < head.levels,
                        "level index out of range in recon_nll");
            const auto block = logits.row(i).subspan(dim * head.levels, head.levels);
            nll += log_sum_exp(block) - block[static_cast<std::size_t>(t)];
        }
    }
    return nll / static_cast<double>(n);
}

Matrix recon_nll_backward(const std::vector<std::int32_t>& targets, const Matrix& logits,
                          const DiscretizedLikelihoodHead& head) {
    const std::size_t n = logits.rows();
    VQB_REQUIRE(logits.cols() == head.logit_cols(), "logit shape mismatch");
    VQB_REQUIRE(targets.size() == n * head.dims, "target shape mismatch");

    Matrix grad(n, logits.cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t dim = 0; dim < head.dims; ++dim) {
            const std::int32_t t = targets[i * head.dims + dim];
            VQB_REQUIRE(t >= 0 && static_cast<std::size_t>(t) < head.levels,
                        "level index out of range");
            const auto block = logits.row(i).subspan(dim * head.levels, head.levels);
            const double lse = log_sum_exp(block);
            for (std::size_t l = 0; l < head.levels; ++l) {
                double g = std::exp(block[l] - lse);
                if (l == static_cast<std::size_t>(t)) g -= 1.0;
                grad(i, dim * head.levels + l) = g / static_cast<double>(n);
            }
        }
    }
    return grad;
}

double classify_nll(const std::vector<std::int32_t>& labels, const Matrix& logits) {
    const std::size_t n = logits.rows();
    VQB_REQUIRE(n > 0, "empty batch in classify_nll");
    VQB_REQUIRE(labels.size() == n, "label count mismatch in classify_nll");

    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t t = labels[i];
        VQB_REQUIRE(t >= 0 && static_cast<std::size_t>(t) < logits.cols(),
                    "label out of range in classify_nll");
        const auto row = logits.row(i);
        nll += log_sum_exp(row) - row[static_cast<std::size_t>(t)];
    }
    return nll / static_cast<double>(n);
}

Matrix classify_nll_backward(const std::vector<std::int32_t>& labels, const Matrix& logits) {
    const std::size_t n = logits.rows();
    VQB_REQUIRE(labels.size() == n, "label count mismatch");

    Matrix grad(n, logits.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t t = labels[i];
        VQB_REQUIRE(t >= 0 && static_cast<std::size_t>(t) < logits.cols(),
                    "label out of range");
        const auto row = logits.row(i);
        const double lse = log_sum_exp(row);
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            double g = std::exp(row[c] - lse);
            if (c == static_cast<std::size_t>(t)) g -= 1.0;
            grad(i, c) = g / static_cast<double>(n);
        }
    }
    return grad;
}

}  // namespace vqb
