#pragma once

#include <functional>

#include "vqb/matrix.hpp"
#include "vqb/rng.hpp"

namespace vqb {

// Fixed-capacity uniform sample of a stream of d-dimensional vectors
// (Vitter's Algorithm R). After any update sequence each stream element is
// present with probability capacity/seen.
struct Reservoir {
    std::size_t capacity = 0;
    std::size_t dim = 0;
    Matrix items;  // capacity x dim, first size() rows valid
    std::size_t seen = 0;

    Reservoir() = default;
    Reservoir(std::size_t capacity_, std::size_t dim_)
        : capacity(capacity_), dim(dim_), items(capacity_, dim_) {}

    std::size_t size() const { return seen < capacity ? seen : capacity; }

    // Copy of the valid rows.
    Matrix contents() const;
};

// Feeds every row of `batch` through the reservoir.
void reservoir_update(Reservoir& res, const Matrix& batch, Rng& rng);

// k-means++ seeding: first seed uniform over points, each next seed drawn
// with probability proportional to squared distance to the nearest chosen
// seed. All K seeds are rows of `points`.
Matrix kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng);

// Called once per Lloyd iteration with the centroids after the mean step and
// the quantization cost of the assignment that produced them.
using LloydObserver = std::function<void(std::size_t iter, const Matrix& centroids, double cost)>;

// Lloyd refinement: alternate nearest-centroid assignment and mean update
// until centroid movement drops below tol or max_iters is reached. Empty
// clusters are re-seeded from the point farthest from its assigned centroid,
// so the quantization cost never increases across iterations.
Matrix lloyd(const Matrix& points, const Matrix& init, std::size_t max_iters,
             double tol, const LloydObserver& observer = {});

// Total squared distance of each point to its nearest centroid; the
// objective Lloyd minimizes.
double quantization_cost(const Matrix& points, const Matrix& centroids);

// k-means++ seeding over the reservoir contents followed by Lloyd refinement.
// The result replaces a live codebook wholesale. lloyd_iters = 0 gives pure
// seeding. Throws if the reservoir holds fewer than k samples.
Matrix reestimate_codebook(const Reservoir& res, std::size_t k, Rng& rng,
                           std::size_t lloyd_iters, double tol = 1e-6);

}  // namespace vqb
