#include "vqb/ema.hpp"

#include "vqb/check.hpp"

namespace vqb {

EmaState make_ema_state(const Codebook& codebook, double discount) {
    VQB_REQUIRE(discount > 0.0 && discount < 1.0, "EMA discount must be in (0,1)");
    EmaState state;
    state.counts.assign(codebook.size(), 1.0);
    state.means = codebook.words;
    state.discount = discount;
    return state;
}

void ema_codebook_update(EmaState& state, const Matrix& latents,
                         const Assignment& assignment, std::size_t head,
                         Codebook& codebook) {
    const std::size_t k = codebook.size();
    const std::size_t d = codebook.dim();
    VQB_REQUIRE(state.counts.size() == k && state.means.rows() == k &&
                    state.means.cols() == d,
                "EMA state does not match codebook");
    VQB_REQUIRE(latents.cols() == d, "latent dimension does not match codebook");
    VQB_REQUIRE(head < assignment.num_heads, "head index out of range");
    VQB_REQUIRE(assignment.batch() == latents.rows(),
                "assignment batch does not match latents");

    const double g = state.discount;
    std::vector<std::size_t> batch_counts(k, 0);
    Matrix batch_sums(k, d);
    for (std::size_t i = 0; i < latents.rows(); ++i) {
        const std::uint32_t idx = assignment.index(i, head);
        VQB_REQUIRE(idx < k, "assignment index out of range");
        batch_counts[idx] += 1;
        for (std::size_t j = 0; j < d; ++j) batch_sums(idx, j) += latents(i, j);
    }

    for (std::size_t i = 0; i < k; ++i) {
        state.counts[i] = state.counts[i] * g + static_cast<double>(batch_counts[i]) * (1.0 - g);
        for (std::size_t j = 0; j < d; ++j)
            state.means(i, j) = state.means(i, j) * g + batch_sums(i, j) * (1.0 - g);
        if (state.counts[i] <= 0.0)
            throw numeric_error("EMA usage count underflowed to zero; discount too aggressive");
        if (batch_counts[i] == 0) continue;  // ratio unchanged, keep w_i exact
        for (std::size_t j = 0; j < d; ++j)
            codebook.words(i, j) = state.means(i, j) / state.counts[i];
    }
}

}  // namespace vqb
