#include "vqb/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "vqb/check.hpp"

namespace vqb {

namespace {

std::int32_t to_level(double v, const SyntheticConfig& cfg) {
    const double r = cfg.value_range;
    const double unit = (std::clamp(v, -r, r) + r) / (2.0 * r);  // [0, 1]
    auto level = static_cast<std::int32_t>(unit * static_cast<double>(cfg.levels));
    return std::min<std::int32_t>(level, static_cast<std::int32_t>(cfg.levels) - 1);
}

double level_center(std::int32_t level, const SyntheticConfig& cfg) {
    const double bin = 2.0 * cfg.value_range / static_cast<double>(cfg.levels);
    return -cfg.value_range + (static_cast<double>(level) + 0.5) * bin;
}

void fill_split(Matrix& x, std::vector<std::int32_t>& levels,
                std::vector<std::int32_t>& labels, std::size_t count,
                const Matrix& means, const SyntheticConfig& cfg, Rng& rng) {
    x = Matrix(count, cfg.dims);
    levels.resize(count * cfg.dims);
    labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto comp = static_cast<std::int32_t>(rng.uniform_index(cfg.components));
        labels[i] = comp;
        for (std::size_t j = 0; j < cfg.dims; ++j) {
            const double v = means(comp, j) + cfg.component_std * rng.normal();
            const std::int32_t level = to_level(v, cfg);
            levels[i * cfg.dims + j] = level;
            x(i, j) = level_center(level, cfg);
        }
    }
}

}  // namespace

Dataset make_synthetic(Task /*task*/, std::uint64_t seed, const SyntheticConfig& cfg) {
    VQB_REQUIRE(cfg.components >= 1 && cfg.dims >= 1 && cfg.levels >= 2,
                "degenerate synthetic config");

    Rng rng(seed ^ 0x5e15e1ab5eedULL);
    const double min_sep = cfg.min_separation_sigmas * cfg.component_std;

    Matrix means(cfg.components, cfg.dims);
    for (std::size_t c = 0; c < cfg.components; ++c) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            for (std::size_t j = 0; j < cfg.dims; ++j) means(c, j) = rng.normal();
            bool separated = true;
            for (std::size_t prev = 0; prev < c && separated; ++prev)
                separated = std::sqrt(sq_dist(means.row(c), means.row(prev))) >= min_sep;
            if (separated) break;
            VQB_REQUIRE(attempt + 1 < 1000, "could not separate mixture components");
        }
    }

    Dataset ds;
    ds.cfg = cfg;
    ds.component_means = means;
    fill_split(ds.train_x, ds.train_levels, ds.train_labels, cfg.train_size, means, cfg, rng);
    fill_split(ds.test_x, ds.test_levels, ds.test_labels, cfg.test_size, means, cfg, rng);
    return ds;
}

Batch Dataset::train_batch(const std::vector<std::size_t>& indices) const {
    Batch b;
    b.x = Matrix(indices.size(), cfg.dims);
    b.recon_targets.resize(indices.size() * cfg.dims);
    b.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        for (std::size_t j = 0; j < cfg.dims; ++j) {
            b.x(i, j) = train_x(src, j);
            b.recon_targets[i * cfg.dims + j] = train_levels[src * cfg.dims + j];
        }
        b.labels[i] = train_labels[src];
    }
    return b;
}

Batch Dataset::test_batch() const {
    Batch b;
    b.x = test_x;
    b.recon_targets = test_levels;
    b.labels = test_labels;
    return b;
}

std::int32_t nearest_mean_label(const Dataset& ds, std::span<const double> x) {
    std::size_t best = 0;
    double best_dist = sq_dist(x, ds.component_means.row(0));
    for (std::size_t c = 1; c < ds.component_means.rows(); ++c) {
        const double d = sq_dist(x, ds.component_means.row(c));
        if (d < best_dist) {
            best_dist = d;
            best = c;
        }
    }
    return static_cast<std::int32_t>(best);
}

}  // namespace vqb
