#pragma once

#include <array>
#include <cstdint>

namespace vqb {

// xoshiro256++ seeded through splitmix64. Identical seed gives an identical
// stream on every platform, which is the reproducibility contract behind all
// experiment CSVs and checkpoint resume. State is plain data so checkpoints
// can persist it exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();

    // Uniform in (0, 1]; never returns zero, safe under log().
    double uniform_pos();

    // Uniform index in [0, n). n must be nonzero.
    std::uint64_t uniform_index(std::uint64_t n);

    // Standard normal via Box-Muller. Recomputed per call, no cached spare,
    // so the state is exactly the four words below.
    double normal();

    // Independent stream derived from this one.
    Rng split();

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace vqb
