#pragma once

#include <cstdint>
#include <vector>

#include "vqb/matrix.hpp"

namespace vqb {

// Decoder output head: an independent categorical distribution over `levels`
// discrete values for each of `dims` output dimensions. Logits for one batch
// row are laid out as dims consecutive blocks of `levels` entries.
struct DiscretizedLikelihoodHead {
    std::size_t dims = 0;
    std::size_t levels = 0;

    std::size_t logit_cols() const { return dims * levels; }
};

// Mean over the batch of -log p(x | q(x)), in nats, summed over dimensions.
// `targets` is row-major batch x dims with level indices in [0, levels).
double recon_nll(const std::vector<std::int32_t>& targets, const Matrix& logits,
                 const DiscretizedLikelihoodHead& head);

// Gradient of recon_nll w.r.t. the logits: (softmax - onehot) / batch.
Matrix recon_nll_backward(const std::vector<std::int32_t>& targets, const Matrix& logits,
                          const DiscretizedLikelihoodHead& head);

// Mean cross-entropy in nats over `labels` under row-wise softmax logits.
double classify_nll(const std::vector<std::int32_t>& labels, const Matrix& logits);

Matrix classify_nll_backward(const std::vector<std::int32_t>& labels, const Matrix& logits);

}  // namespace vqb
