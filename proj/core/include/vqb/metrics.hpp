#pragma once

#include <optional>
#include <span>
#include <string>

namespace vqb {

// nats -> bits per dimension.
double bits_per_dim(double nll_nats, std::size_t dims);

// BPD plus the cost of transmitting one latent index under a uniform prior,
// amortized over the dimensions that latent covers: bpd + log2(K)/dims.
double nelbo_uniform(double bpd, std::size_t codebook_size, double dims_per_latent);

// Same with the unigram prior of observed codeword frequencies:
// bpd + log2(perplexity)/dims.
double nelbo_unigram(double bpd, double perplexity, double dims_per_latent);

// One evaluation record. Quantizer-dependent fields are absent during
// warm-up and for bottleneck-free models, and render as empty CSV fields.
struct MetricsRow {
    std::size_t iteration = 0;
    double task_loss = 0.0;  // nats
    double bpd = 0.0;
    std::optional<double> perplexity;
    std::optional<std::size_t> used_tokens;
    std::optional<double> nelbo_uniform;
    std::optional<double> nelbo_unigram;
};

inline constexpr const char* kMetricsCsvHeader =
    "iteration,task_loss,bpd,perplexity,used_tokens,nelbo_uniform,nelbo_unigram";

std::string to_csv_row(const MetricsRow& row);

// Deterministic float rendering used by all CSV output.
std::string format_double(double v);

// Spearman rank correlation with average ranks on ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace vqb
