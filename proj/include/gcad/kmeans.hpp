#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gcad/core.hpp"
#include "gcad/rng.hpp"

namespace gcad {

struct ClusteringResult {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;  // size N
    Tensor centroids;                     // K x d
    double inertia = 0.0;                 // sum of squared distances to the assigned centroid
    std::vector<double> inertia_curve;    // filled by sweep_inertia
};

namespace detail {

inline double sq_dist_row(const Tensor& x, std::size_t r, const Tensor& c, std::size_t cr) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double d = x(r, j) - c(cr, j);
        s += d * d;
    }
    return s;
}

inline double inertia_of(const Tensor& x, const Tensor& centroids,
                         const std::vector<std::size_t>& assignment) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) s += sq_dist_row(x, i, centroids, assignment[i]);
    return s;
}

// Farthest-point seeding: the first centre is a seeded random point, each
// further centre the point farthest from its nearest chosen centre
// (ties -> lowest index).
inline Tensor seed_centroids(const Tensor& x, std::size_t k, Rng& rng,
                             const Tensor* warm = nullptr) {
    Tensor c(k, x.cols());
    std::vector<double> best(x.rows(), std::numeric_limits<double>::infinity());
    std::size_t have = 0;
    if (warm) {
        for (std::size_t r = 0; r < std::min<std::size_t>(warm->rows(), k); ++r, ++have)
            for (std::size_t j = 0; j < x.cols(); ++j) c(have, j) = (*warm)(r, j);
    } else {
        std::size_t first = rng.uniform_index(x.rows());
        for (std::size_t j = 0; j < x.cols(); ++j) c(0, j) = x(first, j);
        have = 1;
    }
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t s = 0; s < have; ++s)
            best[i] = std::min(best[i], sq_dist_row(x, i, c, s));
    for (; have < k; ++have) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < x.rows(); ++i)
            if (best[i] > best[far]) far = i;
        for (std::size_t j = 0; j < x.cols(); ++j) c(have, j) = x(far, j);
        for (std::size_t i = 0; i < x.rows(); ++i)
            best[i] = std::min(best[i], sq_dist_row(x, i, c, have));
    }
    return c;
}

}  // namespace detail

/// Lloyd's algorithm with farthest-point seeding. Deterministic given the
/// seed; inertia is nonincreasing across iterations. Empty clusters are
/// re-seeded at the point farthest from its own centroid.
inline ClusteringResult kmeans(const Tensor& x, std::size_t k, std::uint64_t seed,
                               std::size_t max_iters = 100, const Tensor* warm_start = nullptr) {
    std::size_t n = x.rows();
    if (k < 1 || k > n) throw Error(detail::concat("kmeans: K=", k, " outside [1, ", n, "]"));
    if (max_iters < 1) throw Error("kmeans: max_iters must be >= 1");

    Rng rng(seed);
    ClusteringResult res;
    res.k = k;
    res.centroids = detail::seed_centroids(x, k, rng, warm_start);
    res.assignment.assign(n, 0);

    auto assign = [&]() {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = detail::sq_dist_row(x, i, res.centroids, 0);
            for (std::size_t c = 1; c < k; ++c) {
                double d = detail::sq_dist_row(x, i, res.centroids, c);
                if (d < bd) { bd = d; best = c; }
            }
            if (res.assignment[i] != best) { res.assignment[i] = best; changed = true; }
        }
        return changed;
    };

    assign();
    double prev_inertia = detail::inertia_of(x, res.centroids, res.assignment);

    for (std::size_t it = 0; it < max_iters; ++it) {
        // Recompute centroids.
        Tensor sums(k, x.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[res.assignment[i]];
            for (std::size_t j = 0; j < x.cols(); ++j) sums(res.assignment[i], j) += x(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Deterministic re-seed: point farthest from its own centroid.
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = detail::sq_dist_row(x, i, res.centroids, res.assignment[i]);
                    if (d > fd) { fd = d; far = i; }
                }
                for (std::size_t j = 0; j < x.cols(); ++j) res.centroids(c, j) = x(far, j);
            } else {
                for (std::size_t j = 0; j < x.cols(); ++j)
                    res.centroids(c, j) = sums(c, j) / double(counts[c]);
            }
        }
        bool changed = assign();
        double cur = detail::inertia_of(x, res.centroids, res.assignment);
        if (cur > prev_inertia + 1e-9 * std::max(1.0, prev_inertia))
            throw NumericError("kmeans: inertia increased across a Lloyd iteration");
        prev_inertia = cur;
        if (!changed) break;
    }
    res.inertia = prev_inertia;
    return res;
}

/// Inertia over K = k_min .. k_max with shared seeding. Each K also tries a
/// warm start from the previous K's centroids, which makes the curve
/// nonincreasing by construction.
inline std::vector<ClusteringResult> sweep_inertia(const Tensor& x, std::size_t k_min,
                                                   std::size_t k_max, std::uint64_t seed) {
    if (k_min < 1 || k_max < k_min || k_max > x.rows())
        throw Error("sweep_inertia: bad K range");
    std::vector<ClusteringResult> out;
    std::vector<double> curve;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        ClusteringResult fresh = kmeans(x, k, seed);
        if (!out.empty()) {
            // Warm start can only match or improve the previous K's inertia,
            // so the curve is nonincreasing.
            ClusteringResult warm = kmeans(x, k, seed, 100, &out.back().centroids);
            if (warm.inertia < fresh.inertia) fresh = std::move(warm);
        }
        curve.push_back(fresh.inertia);
        out.push_back(std::move(fresh));
    }
    for (auto& r : out) r.inertia_curve = curve;
    return out;
}

/// Elbow rule: with sigma(K) = inertia(K) - inertia(K+1), picks the interior
/// K maximizing sigma(K-1) - sigma(K); ties and flat curves go to the
/// smallest K.
inline std::size_t elbow_select(const std::vector<double>& curve, std::size_t k_min) {
    if (curve.size() < 3) throw Error("elbow_select: need at least 3 curve points");
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i] > curve[i - 1] + 1e-9 * std::max(1.0, curve[i - 1]))
            throw Error("elbow_select: inertia curve must be nonincreasing");

    std::size_t best = 1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        double score = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
        if (score > best_score + 1e-12) {
            best_score = score;
            best = i;
        }
    }
    // No curvature anywhere (flat or strictly linear curve): fall back to K_min.
    if (best_score < 1e-12) return k_min;
    return k_min + best;
}

}  // namespace gcad
