#include "vqb/clustering.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "vqb/check.hpp"

namespace vqb {

Matrix Reservoir::contents() const {
    const std::size_t n = size();
    Matrix out(n, dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) out(i, j) = items(i, j);
    return out;
}

void reservoir_update(Reservoir& res, const Matrix& batch, Rng& rng) {
    VQB_REQUIRE(batch.cols() == res.dim || batch.rows() == 0,
                "batch dimension does not match reservoir");
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        res.seen += 1;
        std::size_t slot;
        if (res.seen <= res.capacity) {
            slot = res.seen - 1;
        } else {
            // Element res.seen survives with probability capacity/seen.
            const std::uint64_t j = rng.uniform_index(res.seen);
            if (j >= res.capacity) continue;
            slot = static_cast<std::size_t>(j);
        }
        for (std::size_t c = 0; c < res.dim; ++c) res.items(slot, c) = batch(i, c);
    }
}

Matrix kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t m = points.rows();
    VQB_REQUIRE(k >= 1, "k must be at least 1");
    VQB_REQUIRE(m >= k, "k-means++ needs at least k points");
    VQB_REQUIRE(points.all_finite(), "non-finite points in kmeanspp_seed");

    Matrix seeds(k, points.cols());
    std::vector<double> d2(m);

    const std::size_t first = static_cast<std::size_t>(rng.uniform_index(m));
    for (std::size_t j = 0; j < points.cols(); ++j) seeds(0, j) = points(first, j);
    for (std::size_t i = 0; i < m; ++i) d2[i] = sq_dist(points.row(i), seeds.row(0));

    for (std::size_t s = 1; s < k; ++s) {
        double total = 0.0;
        for (double w : d2) total += w;

        std::size_t pick;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            pick = m - 1;
            for (std::size_t i = 0; i < m; ++i) {
                cum += d2[i];
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All points coincide with chosen seeds (duplicated point set);
            // fall back to a uniform pick.
            pick = static_cast<std::size_t>(rng.uniform_index(m));
        }

        for (std::size_t j = 0; j < points.cols(); ++j) seeds(s, j) = points(pick, j);
        for (std::size_t i = 0; i < m; ++i)
            d2[i] = std::min(d2[i], sq_dist(points.row(i), seeds.row(s)));
    }
    return seeds;
}

double quantization_cost(const Matrix& points, const Matrix& centroids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = sq_dist(points.row(i), centroids.row(0));
        for (std::size_t j = 1; j < centroids.rows(); ++j)
            best = std::min(best, sq_dist(points.row(i), centroids.row(j)));
        cost += best;
    }
    return cost;
}

Matrix lloyd(const Matrix& points, const Matrix& init, std::size_t max_iters,
             double tol, const LloydObserver& observer) {
    VQB_REQUIRE(points.cols() == init.cols(), "dimension mismatch in lloyd");
    VQB_REQUIRE(points.rows() >= 1 && init.rows() >= 1, "empty input in lloyd");

    const std::size_t m = points.rows();
    const std::size_t k = init.rows();
    const std::size_t d = points.cols();
    Matrix centroids = init;
    std::vector<std::size_t> assign(m);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // Assignment step; ties to the lowest index.
        double cost = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t best = 0;
            double best_dist = sq_dist(points.row(i), centroids.row(0));
            for (std::size_t j = 1; j < k; ++j) {
                const double dist = sq_dist(points.row(i), centroids.row(j));
                if (dist < best_dist) {
                    best_dist = dist;
                    best = j;
                }
            }
            assign[i] = best;
            cost += best_dist;
        }

        // Mean step.
        Matrix next(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < m; ++i) {
            counts[assign[i]] += 1;
            for (std::size_t c = 0; c < d; ++c) next(assign[i], c) += points(i, c);
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            for (std::size_t c = 0; c < d; ++c) next(j, c) /= static_cast<double>(counts[j]);
        }

        // Empty clusters take the point farthest from its assigned centroid,
        // each empty cluster a distinct point.
        std::vector<bool> taken(m, false);
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t farthest = 0;
            double far_dist = -1.0;
            for (std::size_t i = 0; i < m; ++i) {
                if (taken[i]) continue;
                const double dist = sq_dist(points.row(i), next.row(assign[i]));
                if (dist > far_dist) {
                    far_dist = dist;
                    farthest = i;
                }
            }
            taken[farthest] = true;
            for (std::size_t c = 0; c < d; ++c) next(j, c) = points(farthest, c);
        }

        double movement = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            movement = std::max(movement, std::sqrt(sq_dist(next.row(j), centroids.row(j))));
        centroids = std::move(next);

        if (observer) observer(iter, centroids, cost);
        if (movement < tol) break;
    }
    return centroids;
}

Matrix reestimate_codebook(const Reservoir& res, std::size_t k, Rng& rng,
                           std::size_t lloyd_iters, double tol) {
    if (res.size() < k) {
        throw std::invalid_argument(
            "reservoir holds " + std::to_string(res.size()) + " samples but " +
            std::to_string(k) + " are required; grow the reservoir capacity to at least " +
            std::to_string(k) + " or shrink K");
    }
    const Matrix points = res.contents();
    Matrix seeds = kmeanspp_seed(points, k, rng);
    if (lloyd_iters == 0) return seeds;
    return lloyd(points, seeds, lloyd_iters, tol);
}

}  // namespace vqb
