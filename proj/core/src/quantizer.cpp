#include "vqb/quantizer.hpp"

#include <cmath>

#include "vqb/check.hpp"

namespace vqb {

void UsageHistogram::merge(const UsageHistogram& other) {
    VQB_REQUIRE(counts.size() == other.counts.size(),
                "histogram size mismatch in UsageHistogram::merge");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    total += other.total;
}

Assignment nearest_code(const Matrix& latents, const Codebook& codebook) {
    VQB_REQUIRE(latents.cols() == codebook.dim(),
                "latent dimension does not match codebook dimension");
    VQB_REQUIRE(codebook.size() >= 1, "empty codebook");

    Assignment out;
    out.num_heads = 1;
    out.indices.resize(latents.rows());
    out.usage = UsageHistogram(codebook.size());

    for (std::size_t i = 0; i < latents.rows(); ++i) {
        const auto e = latents.row(i);
        std::uint32_t best = 0;
        double best_dist = sq_dist(e, codebook.words.row(0));
        for (std::size_t j = 1; j < codebook.size(); ++j) {
            const double d = sq_dist(e, codebook.words.row(j));
            if (d < best_dist) {  // strict: ties keep the lowest index
                best_dist = d;
                best = static_cast<std::uint32_t>(j);
            }
        }
        out.indices[i] = best;
        out.usage.add(best);
    }
    return out;
}

std::pair<Matrix, Assignment> quantize(const Matrix& latents,
                                       const std::vector<Codebook>& codebooks,
                                       const QuantizerConfig& cfg) {
    VQB_REQUIRE(cfg.num_heads >= 1, "num_heads must be at least 1");
    VQB_REQUIRE(codebooks.size() == cfg.num_heads, "one codebook per head required");
    VQB_REQUIRE(latents.cols() % cfg.num_heads == 0,
                "num_heads must divide the latent dimension");

    const std::size_t n = latents.rows();
    const std::size_t dh = latents.cols() / cfg.num_heads;
    const std::size_t k = codebooks.front().size();
    for (const auto& cb : codebooks) {
        VQB_REQUIRE(cb.dim() == dh, "codebook dimension does not match head block");
        VQB_REQUIRE(cb.size() == k, "all heads must share the same codebook size");
    }

    Matrix quantized(n, latents.cols());
    Assignment out;
    out.num_heads = cfg.num_heads;
    out.indices.resize(n * cfg.num_heads);
    out.usage = UsageHistogram(k);

    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
        const Matrix block = head_block(latents, h, cfg.num_heads);
        const Assignment head_assign = nearest_code(block, codebooks[h]);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t idx = head_assign.indices[i];
            out.indices[i * cfg.num_heads + h] = idx;
            out.usage.add(idx);
            const auto w = codebooks[h].words.row(idx);
            for (std::size_t j = 0; j < dh; ++j) quantized(i, h * dh + j) = w[j];
        }
    }
    return {std::move(quantized), std::move(out)};
}

LossBreakdown vq_loss(const Matrix& latents, const Matrix& quantized,
                      double task_loss, double gamma_commit) {
    VQB_REQUIRE(latents.same_shape(quantized), "shape mismatch in vq_loss");
    VQB_REQUIRE(latents.rows() > 0, "empty batch in vq_loss");

    double mean_sq = 0.0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const double diff = latents.data()[i] - quantized.data()[i];
        mean_sq += diff * diff;
    }
    mean_sq /= static_cast<double>(latents.rows());

    LossBreakdown out;
    out.task = task_loss;
    out.codebook = mean_sq;
    out.commitment = gamma_commit * mean_sq;
    out.total = out.task + out.codebook + out.commitment;
    return out;
}

Matrix straight_through_backward(const Matrix& grad_wrt_quantized,
                                 const Matrix& latents, const Matrix& quantized,
                                 double gamma_commit) {
    VQB_REQUIRE(grad_wrt_quantized.same_shape(latents) && latents.same_shape(quantized),
                "shape mismatch in straight_through_backward");
    VQB_REQUIRE(latents.rows() > 0, "empty batch in straight_through_backward");

    const double scale = 2.0 * gamma_commit / static_cast<double>(latents.rows());
    Matrix grad = grad_wrt_quantized;
    for (std::size_t i = 0; i < grad.size(); ++i)
        grad.data()[i] += scale * (latents.data()[i] - quantized.data()[i]);
    return grad;
}

Matrix codebook_grad(const Matrix& latents, const Assignment& assignment,
                     std::size_t head, const Codebook& codebook) {
    VQB_REQUIRE(latents.cols() == codebook.dim(),
                "latent dimension does not match codebook dimension");
    VQB_REQUIRE(head < assignment.num_heads, "head index out of range");
    VQB_REQUIRE(assignment.batch() == latents.rows(),
                "assignment batch does not match latents");

    const std::size_t n = latents.rows();
    Matrix grad(codebook.size(), codebook.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t idx = assignment.index(i, head);
        VQB_REQUIRE(idx < codebook.size(), "assignment index out of range");
        const auto e = latents.row(i);
        const auto w = codebook.words.row(idx);
        for (std::size_t j = 0; j < codebook.dim(); ++j)
            grad(idx, j) += 2.0 * (w[j] - e[j]);
    }
    grad *= 1.0 / static_cast<double>(n);
    return grad;
}

Matrix codebook_grad(const Matrix& latents, const Assignment& assignment,
                     const Codebook& codebook) {
    return codebook_grad(latents, assignment, 0, codebook);
}

double perplexity(const UsageHistogram& usage) {
    VQB_REQUIRE(usage.total > 0, "perplexity of an empty histogram");
    double entropy = 0.0;
    const double total = static_cast<double>(usage.total);
    for (std::int64_t c : usage.counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

std::size_t used_tokens(const UsageHistogram& usage) {
    std::size_t used = 0;
    for (std::int64_t c : usage.counts)
        if (c > 0) ++used;
    return used;
}

Codebook init_codebook(std::size_t k, std::size_t d, double init_scale, Rng& rng) {
    VQB_REQUIRE(k >= 1 && d >= 1, "codebook needs K >= 1 and d >= 1");
    VQB_REQUIRE(init_scale >= 0.0, "negative init_scale");
    Codebook cb{Matrix(k, d)};
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < d; ++j) cb.words(i, j) = init_scale * rng.normal();
    return cb;
}

}  // namespace vqb
