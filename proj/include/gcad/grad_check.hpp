#pragma once

#include <functional>
#include <vector>

#include "gcad/autodiff.hpp"
#include "gcad/core.hpp"

namespace gcad {

/// A function that rebuilds the computation on a fresh tape from leaf values
/// and returns the scalar loss node.
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares analytic gradients against central finite differences at `points`.
/// Returns the max over all coordinates of
///   |analytic - fd| / max(1, |fd|).
inline double grad_check(const TapeFn& f, const std::vector<Tensor>& points, double h = 1e-5) {
    if (h <= 0.0) throw Error("grad_check: step h must be positive");

    auto eval = [&](const std::vector<Tensor>& pts) {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(pts.size());
        for (const Tensor& p : pts) leaves.push_back(tape.leaf(p));
        Var loss = f(tape, leaves);
        const Tensor& v = loss.value();
        if (v.rows() != 1 || v.cols() != 1)
            throw NumericError("grad_check: f must return a 1x1 loss");
        return v(0, 0);
    };

    // One backward pass for the analytic side.
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : points) leaves.push_back(tape.leaf(p));
    Var loss = f(tape, leaves);
    tape.backward(loss);

    double worst = 0.0;
    std::vector<Tensor> work = points;
    for (std::size_t k = 0; k < points.size(); ++k) {
        for (std::size_t i = 0; i < points[k].size(); ++i) {
            double orig = work[k][i];
            work[k][i] = orig + h;
            double up = eval(work);
            work[k][i] = orig - h;
            double down = eval(work);
            work[k][i] = orig;
            double fd = (up - down) / (2.0 * h);
            double analytic = leaves[k].grad()[i];
            double err = std::fabs(analytic - fd) / std::max(1.0, std::fabs(fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace gcad
