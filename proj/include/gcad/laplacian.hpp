#pragma once

#include <cmath>
#include <vector>

#include "gcad/core.hpp"
#include "gcad/graph.hpp"
#include "gcad/jacobi.hpp"

namespace gcad {

/// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}. Isolated nodes get
/// an all-zero row and column (including the diagonal), so an empty graph
/// maps to the zero matrix.
inline Tensor normalized_laplacian(const Graph& g) {
    std::size_t n = g.num_nodes();
    std::vector<double> inv_sqrt_deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (g.adjacency(i, j) < 0.0)
                throw NumericError(detail::concat("normalized_laplacian: negative weight at (", i,
                                                  ",", j, ")"));
            deg += g.adjacency(i, j);
        }
        if (deg > 0.0) inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    Tensor lap(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (inv_sqrt_deg[i] == 0.0) continue;
        lap(i, i) = 1.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && g.adjacency(i, j) > 0.0)
                lap(i, j) = -g.adjacency(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
    return lap;
}

struct EigenFeatures {
    std::vector<double> eigenvalues;  // ascending, size k
    Tensor eigenvectors;              // N x k, unit-norm columns
};

/// The k eigenvectors of the normalized Laplacian, smallest eigenvalues first
/// (spectral-embedding convention). Pass largest=true for the opposite order.
inline EigenFeatures eigen_features(const Graph& g, std::size_t k, bool largest = false) {
    std::size_t n = g.num_nodes();
    if (k < 1 || k > n)
        throw Error(detail::concat("eigen_features: k=", k, " outside [1, ", n, "]"));
    EigenDecomposition full = jacobi_eigen(normalized_laplacian(g));
    EigenFeatures out;
    out.eigenvalues.resize(k);
    out.eigenvectors = Tensor(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t src = largest ? n - 1 - c : c;
        out.eigenvalues[c] = full.eigenvalues[src];
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = full.eigenvectors(r, src);
    }
    return out;
}

}  // namespace gcad
