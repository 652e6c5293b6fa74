#pragma once

#include <cstdint>
#include <vector>

#include "vqb/matrix.hpp"
#include "vqb/trainer.hpp"

namespace vqb {

struct SyntheticConfig {
    std::size_t components = 16;  // Gaussian mixture components
    std::size_t dims = 16;
    std::size_t levels = 16;      // discretization levels per dimension
    std::size_t train_size = 4096;
    std::size_t test_size = 512;
    double component_std = 0.1;
    double value_range = 4.0;     // values clamped to [-range, range]
    double min_separation_sigmas = 6.0;
};

// Desk-scale stand-in for the real corpora: a fixed Gaussian mixture whose
// samples are discretized to `levels` values per dimension. x holds the level
// centers (what the encoder sees), `levels` the target indices, `labels` the
// mixture component of each sample.
struct Dataset {
    Matrix train_x;
    std::vector<std::int32_t> train_levels;
    std::vector<std::int32_t> train_labels;
    Matrix test_x;
    std::vector<std::int32_t> test_levels;
    std::vector<std::int32_t> test_labels;
    SyntheticConfig cfg;
    Matrix component_means;  // components x dims

    Batch train_batch(const std::vector<std::size_t>& indices) const;
    Batch test_batch() const;
};

// Same seed gives an identical dataset; component means are redrawn until
// every pair is at least min_separation_sigmas * component_std apart.
Dataset make_synthetic(Task task, std::uint64_t seed, const SyntheticConfig& cfg = {});

// Index of the nearest component mean; the sanity oracle for the generator.
std::int32_t nearest_mean_label(const Dataset& ds, std::span<const double> x);

}  // namespace vqb
