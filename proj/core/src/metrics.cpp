#include "vqb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <vector>

#include "vqb/check.hpp"

namespace vqb {

double bits_per_dim(double nll_nats, std::size_t dims) {
    VQB_REQUIRE(dims > 0, "bits_per_dim needs dims > 0");
    return nll_nats / (static_cast<double>(dims) * std::numbers::ln2);
}

double nelbo_uniform(double bpd, std::size_t codebook_size, double dims_per_latent) {
    VQB_REQUIRE(codebook_size >= 1, "codebook_size must be at least 1");
    VQB_REQUIRE(dims_per_latent > 0.0, "dims_per_latent must be positive");
    return bpd + std::log2(static_cast<double>(codebook_size)) / dims_per_latent;
}

double nelbo_unigram(double bpd, double perplexity, double dims_per_latent) {
    VQB_REQUIRE(perplexity >= 1.0, "perplexity must be at least 1");
    VQB_REQUIRE(dims_per_latent > 0.0, "dims_per_latent must be positive");
    return bpd + std::log2(perplexity) / dims_per_latent;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string to_csv_row(const MetricsRow& row) {
    std::string out = std::to_string(row.iteration);
    out += ',';
    out += format_double(row.task_loss);
    out += ',';
    out += format_double(row.bpd);
    out += ',';
    if (row.perplexity) out += format_double(*row.perplexity);
    out += ',';
    if (row.used_tokens) out += std::to_string(*row.used_tokens);
    out += ',';
    if (row.nelbo_uniform) out += format_double(*row.nelbo_uniform);
    out += ',';
    if (row.nelbo_unigram) out += format_double(*row.nelbo_unigram);
    return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    VQB_REQUIRE(a.size() == b.size() && a.size() >= 2, "spearman needs two equal series");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double mean = (n + 1.0) / 2.0;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - mean;
        const double db = rb[i] - mean;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

}  // namespace vqb
