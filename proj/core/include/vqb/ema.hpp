#pragma once

#include <vector>

#include "vqb/matrix.hpp"
#include "vqb/quantizer.hpp"

namespace vqb {

// Per-codeword running usage count N_i and running mean sum m_i. The
// codeword is kept at w_i = m_i / N_i, which rescales the effective learning
// rate individually per codeword: usage above the running count moves the
// codeword further toward the batch mean, usage below it moves it less.
struct EmaState {
    std::vector<double> counts;  // N_i
    Matrix means;                // K x d, m_i
    double discount = 0.99;
};

// N_i = 1 and m_i = w_i at the moment the rule is enabled, so the first
// update is well defined. Also applied after every codebook reestimation.
EmaState make_ema_state(const Codebook& codebook, double discount);

// N_i <- N_i*g + n_i*(1-g); m_i <- m_i*g + sum_assigned(e)*(1-g);
// w_i <- m_i/N_i. Counts and means of unassigned codewords decay by the same
// factor, which leaves their ratio, and therefore the codeword, unchanged.
// Throws numeric_error if any N_i underflows to zero.
void ema_codebook_update(EmaState& state, const Matrix& latents,
                         const Assignment& assignment, std::size_t head,
                         Codebook& codebook);

}  // namespace vqb
