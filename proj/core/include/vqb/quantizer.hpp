#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vqb/matrix.hpp"
#include "vqb/rng.hpp"

namespace vqb {

// K codewords of dimension d, learned as the centroids of an on-line k-means.
// Capacity is log2(K) bits per quantized vector.
struct Codebook {
    Matrix words;  // K x d

    std::size_t size() const { return words.rows(); }
    std::size_t dim() const { return words.cols(); }
};

struct QuantizerConfig {
    double gamma_commit = 0.25;  // commitment loss coefficient
    std::size_t num_heads = 1;   // independent equal-block codebooks
    double init_scale = 1.0;     // codeword initialization scale
};

// Empirical codeword usage counts; the statistic behind perplexity and
// used-token metrics.
struct UsageHistogram {
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    explicit UsageHistogram(std::size_t k = 0) : counts(k, 0) {}
    void add(std::size_t index) {
        ++counts[index];
        ++total;
    }
    void merge(const UsageHistogram& other);
};

// Nearest-codeword indices for a batch, one column per head, plus the usage
// histogram pooled over heads (total == batch * num_heads).
struct Assignment {
    std::size_t num_heads = 1;
    std::vector<std::uint32_t> indices;  // batch x num_heads, row-major
    UsageHistogram usage;

    std::size_t batch() const { return num_heads ? indices.size() / num_heads : 0; }
    std::uint32_t index(std::size_t row, std::size_t head) const {
        return indices[row * num_heads + head];
    }
};

// The three loss terms: task loss, codebook term ||sg[e]-q||^2, and the
// gamma-scaled commitment term. Both quantizer terms use batch means so
// learning rates are batch-size invariant.
struct LossBreakdown {
    double task = 0.0;
    double codebook = 0.0;
    double commitment = 0.0;
    double total = 0.0;
};

// Index of the nearest codeword per latent row; ties broken by lowest index.
Assignment nearest_code(const Matrix& latents, const Codebook& codebook);

// Multi-head quantization: each of the num_heads equal column blocks is
// replaced by its nearest codeword from that head's codebook. With one head
// this is nearest_code plus a row gather.
std::pair<Matrix, Assignment> quantize(const Matrix& latents,
                                       const std::vector<Codebook>& codebooks,
                                       const QuantizerConfig& cfg);

LossBreakdown vq_loss(const Matrix& latents, const Matrix& quantized,
                      double task_loss, double gamma_commit);

// Straight-through estimator plus the commitment-term gradient:
// grad_wrt_quantized + 2*gamma*(e - q)/n.
Matrix straight_through_backward(const Matrix& grad_wrt_quantized,
                                 const Matrix& latents, const Matrix& quantized,
                                 double gamma_commit);

// Gradient of the codebook loss term for one head: row i is
// (1/n) * sum_{j assigned to i} 2*(w_i - e_j). Rows of unused codewords stay
// zero. `latents` holds that head's d-dimensional blocks.
Matrix codebook_grad(const Matrix& latents, const Assignment& assignment,
                     std::size_t head, const Codebook& codebook);
Matrix codebook_grad(const Matrix& latents, const Assignment& assignment,
                     const Codebook& codebook);

// exp of the Shannon entropy of the empirical usage distribution; in [1, K].
double perplexity(const UsageHistogram& usage);

// Number of codewords with nonzero usage.
std::size_t used_tokens(const UsageHistogram& usage);

// Entries i.i.d. normal scaled by init_scale. The scale knob is the
// experimental handle for the codeword/latent magnitude ratio.
Codebook init_codebook(std::size_t k, std::size_t d, double init_scale, Rng& rng);

}  // namespace vqb
