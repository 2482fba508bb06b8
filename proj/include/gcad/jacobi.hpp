#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gcad/core.hpp"

namespace gcad {

struct EigenDecomposition {
    std::vector<double> eigenvalues;  // ascending
    Tensor eigenvectors;              // NxN, column k pairs with eigenvalues[k]
};

namespace detail {

inline double off_diagonal_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix. Sweeps until
/// the off-diagonal Frobenius norm drops below `tol` (or max_sweeps).
inline EigenDecomposition jacobi_eigen(const Tensor& input, double tol = 1e-10,
                                       int max_sweeps = 100) {
    if (input.rows() != input.cols())
        throw NumericError(detail::concat("jacobi_eigen: matrix must be square, got ",
                                          input.shape_str()));
    std::size_t n = input.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(input(i, j) - input(j, i)) > 1e-12 * std::max(1.0, input.frobenius_norm()))
                throw NumericError("jacobi_eigen: matrix is not symmetric");

    Tensor a = input;
    Tensor v = Tensor::identity(n);

    for (int sweep = 0; sweep < max_sweeps && detail::off_diagonal_norm(a) > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::fabs(apq) == 0.0) continue;
                double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = std::copysign(1.0, tau) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

    out.eigenvectors = Tensor(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = diag[order[k]];
        // Normalize and fix the sign so the decomposition is deterministic.
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += v(i, order[k]) * v(i, order[k]);
        norm = std::sqrt(norm);
        double sign = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = v(i, order[k]);
            if (std::fabs(e) > 1e-12) {
                sign = e > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            out.eigenvectors(i, k) = sign * v(i, order[k]) / (norm > 0.0 ? norm : 1.0);
    }
    return out;
}

}  // namespace gcad
