#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "gcad/core.hpp"

namespace gcad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape* tape() const { return tape_; }

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in topological order during the
/// forward pass; backward() walks them in reverse. One tape per forward pass;
/// tapes are confined to a single thread.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;  // persistent accumulator, zeroed only by zero_grad()
        const char* op;
        // Propagates the adjoint of this node into its parents' adjoints.
        std::function<void(Tape&, const Tensor& out_adj, std::vector<Tensor>& adj)> backprop;
    };

    /// Differentiable input (parameter or anything whose gradient is read).
    Var leaf(Tensor value, const char* op = "leaf") {
        return push(std::move(value), op, nullptr);
    }

    /// Input whose gradient nobody reads. Stored identically to a leaf.
    Var constant(Tensor value) { return leaf(std::move(value), "constant"); }

    const Node& node(int id) const { return nodes_[id]; }
    Node& node(int id) { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    /// Accumulates d(loss)/d(node) into every node's grad. loss must be 1x1.
    /// Repeated calls without zero_grad() keep accumulating.
    void backward(Var loss) {
        if (loss.tape() != this) throw NumericError("backward: loss from another tape");
        const Tensor& lv = nodes_[loss.id()].value;
        if (lv.rows() != 1 || lv.cols() != 1)
            throw NumericError(detail::concat("backward: loss must be 1x1, got ", lv.shape_str()));
        std::vector<Tensor> adj(nodes_.size());
        adj[loss.id()] = Tensor(1, 1, 1.0);
        for (int id = loss.id(); id >= 0; --id) {
            if (adj[id].empty()) continue;
            if (nodes_[id].backprop) nodes_[id].backprop(*this, adj[id], adj);
        }
        for (std::size_t id = 0; id < nodes_.size(); ++id) {
            if (adj[id].empty()) continue;
            Tensor& g = nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += adj[id][i];
        }
    }

    void zero_grad() {
        for (auto& n : nodes_) n.grad.fill(0.0);
    }

    /// Adjoint accumulator for a parent node, allocated on first touch.
    Tensor& adj_of(std::vector<Tensor>& adj, int id) {
        if (adj[id].empty()) adj[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
        return adj[id];
    }

    Var push(Tensor value, const char* op,
             std::function<void(Tape&, const Tensor&, std::vector<Tensor>&)> backprop) {
        require_finite(op, value);
        Tensor grad(value.rows(), value.cols());
        nodes_.push_back(Node{std::move(value), std::move(grad), op, std::move(backprop)});
        return Var(this, int(nodes_.size()) - 1);
    }

private:
    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->node(id_).value; }
inline const Tensor& Var::grad() const { return tape_->node(id_).grad; }

namespace detail {

inline Tape* same_tape(const char* op, Var a, Var b) {
    if (a.tape() != b.tape()) throw NumericError(concat(op, ": operands on different tapes"));
    return a.tape();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward ops. Each records its backward rule on the tape.
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
    Tape* t = detail::same_tape("matmul", a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.cols() != B.rows())
        throw NumericError(detail::concat("matmul: shape mismatch (", A.shape_str(), " vs ",
                                          B.shape_str(), ")"));
    Tensor C(A.rows(), B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = 0; k < A.cols(); ++k) {
            double aik = A(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < B.cols(); ++j) C(i, j) += aik * B(k, j);
        }
    int ia = a.id(), ib = b.id();
    return t->push(std::move(C), "matmul",
                   [ia, ib](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& A = tp.node(ia).value;
                       const Tensor& B = tp.node(ib).value;
                       Tensor& da = tp.adj_of(adj, ia);
                       Tensor& db = tp.adj_of(adj, ib);
                       // dA += g * B^T ; dB += A^T * g
                       for (std::size_t i = 0; i < A.rows(); ++i)
                           for (std::size_t j = 0; j < B.cols(); ++j) {
                               double gij = g(i, j);
                               if (gij == 0.0) continue;
                               for (std::size_t k = 0; k < A.cols(); ++k) {
                                   da(i, k) += gij * B(k, j);
                                   db(k, j) += A(i, k) * gij;
                               }
                           }
                   });
}

namespace detail {

// add/sub support a 1-row second operand broadcast down the rows (bias terms).
inline Var add_like(const char* op, Var a, Var b, double sign) {
    Tape* t = same_tape(op, a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
    if (!broadcast) require_same_shape(op, A, B);
    Tensor C(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = 0; c < A.cols(); ++c)
            C(r, c) = A(r, c) + sign * B(broadcast ? 0 : r, c);
    int ia = a.id(), ib = b.id();
    return t->push(std::move(C), op,
                   [ia, ib, sign, broadcast](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& da = tp.adj_of(adj, ia);
                       Tensor& db = tp.adj_of(adj, ib);
                       for (std::size_t r = 0; r < g.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) {
                               da(r, c) += g(r, c);
                               db(broadcast ? 0 : r, c) += sign * g(r, c);
                           }
                   });
}

template <typename F, typename DF>
Var unary_elementwise(const char* op, Var x, F f, DF dfdx_from_xy) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    Tensor Y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.size(); ++i) Y[i] = f(X[i]);
    int ix = x.id();
    return t->push(std::move(Y), op,
                   [ix, dfdx_from_xy](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& X = tp.node(ix).value;
                       Tensor& dx = tp.adj_of(adj, ix);
                       // y is not stored; recompute derivative from x only.
                       for (std::size_t i = 0; i < X.size(); ++i) dx[i] += g[i] * dfdx_from_xy(X[i]);
                   });
}

}  // namespace detail

inline Var add(Var a, Var b) { return detail::add_like("add", a, b, 1.0); }
inline Var sub(Var a, Var b) { return detail::add_like("sub", a, b, -1.0); }

inline Var scalar_mul(Var a, double c) {
    Tape* t = a.tape();
    const Tensor& A = a.value();
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = c * A[i];
    int ia = a.id();
    return t->push(std::move(C), "scalar_mul",
                   [ia, c](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& da = tp.adj_of(adj, ia);
                       for (std::size_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
                   });
}

/// Elementwise product of a 1x1 node with any tensor.
inline Var scale_by(Var s, Var a) {
    Tape* t = detail::same_tape("scale_by", s, a);
    if (s.value().rows() != 1 || s.value().cols() != 1)
        throw NumericError("scale_by: scale must be 1x1");
    double sv = s.value()(0, 0);
    const Tensor& A = a.value();
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = sv * A[i];
    int is = s.id(), ia = a.id();
    return t->push(std::move(C), "scale_by",
                   [is, ia](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& A = tp.node(ia).value;
                       double sv = tp.node(is).value(0, 0);
                       Tensor& ds = tp.adj_of(adj, is);
                       Tensor& da = tp.adj_of(adj, ia);
                       for (std::size_t i = 0; i < A.size(); ++i) {
                           ds[0] += g[i] * A[i];
                           da[i] += sv * g[i];
                       }
                   });
}

/// Hadamard product, same shape.
inline Var hadamard(Var a, Var b) {
    Tape* t = detail::same_tape("hadamard", a, b);
    require_same_shape("hadamard", a.value(), b.value());
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * B[i];
    int ia = a.id(), ib = b.id();
    return t->push(std::move(C), "hadamard",
                   [ia, ib](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& A = tp.node(ia).value;
                       const Tensor& B = tp.node(ib).value;
                       Tensor& da = tp.adj_of(adj, ia);
                       Tensor& db = tp.adj_of(adj, ib);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                           da[i] += g[i] * B[i];
                           db[i] += g[i] * A[i];
                       }
                   });
}

inline Var concat_rows(Var a, Var b) {
    Tape* t = detail::same_tape("concat_rows", a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.cols() != B.cols())
        throw NumericError(detail::concat("concat_rows: shape mismatch (", A.shape_str(), " vs ",
                                          B.shape_str(), ")"));
    Tensor C(A.rows() + B.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = 0; c < A.cols(); ++c) C(r, c) = A(r, c);
    for (std::size_t r = 0; r < B.rows(); ++r)
        for (std::size_t c = 0; c < B.cols(); ++c) C(A.rows() + r, c) = B(r, c);
    int ia = a.id(), ib = b.id();
    std::size_t ra = A.rows();
    return t->push(std::move(C), "concat_rows",
                   [ia, ib, ra](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& da = tp.adj_of(adj, ia);
                       Tensor& db = tp.adj_of(adj, ib);
                       for (std::size_t r = 0; r < da.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) da(r, c) += g(r, c);
                       for (std::size_t r = 0; r < db.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) db(r, c) += g(ra + r, c);
                   });
}

inline Var concat_cols(Var a, Var b) {
    Tape* t = detail::same_tape("concat_cols", a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rows() != B.rows())
        throw NumericError(detail::concat("concat_cols: shape mismatch (", A.shape_str(), " vs ",
                                          B.shape_str(), ")"));
    Tensor C(A.rows(), A.cols() + B.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        for (std::size_t c = 0; c < A.cols(); ++c) C(r, c) = A(r, c);
        for (std::size_t c = 0; c < B.cols(); ++c) C(r, A.cols() + c) = B(r, c);
    }
    int ia = a.id(), ib = b.id();
    std::size_t ca = A.cols();
    return t->push(std::move(C), "concat_cols",
                   [ia, ib, ca](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& da = tp.adj_of(adj, ia);
                       Tensor& db = tp.adj_of(adj, ib);
                       for (std::size_t r = 0; r < g.rows(); ++r) {
                           for (std::size_t c = 0; c < da.cols(); ++c) da(r, c) += g(r, c);
                           for (std::size_t c = 0; c < db.cols(); ++c) db(r, c) += g(r, ca + c);
                       }
                   });
}

inline Var sigmoid(Var x) {
    return detail::unary_elementwise(
        "sigmoid", x,
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double v) {
            double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            return s * (1.0 - s);
        });
}

inline Var relu(Var x) {
    return detail::unary_elementwise(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh_op(Var x) {
    return detail::unary_elementwise(
        "tanh", x, [](double v) { return std::tanh(v); },
        [](double v) {
            double y = std::tanh(v);
            return 1.0 - y * y;
        });
}

inline Var exp_op(Var x) {
    return detail::unary_elementwise(
        "exp", x, [](double v) { return std::exp(v); },
        [](double v) { return std::exp(v); });
}

inline Var log_op(Var x) {
    const Tensor& X = x.value();
    for (std::size_t i = 0; i < X.size(); ++i)
        if (X[i] <= 0.0) throw NumericError("log: non-positive input");
    return detail::unary_elementwise(
        "log", x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

inline Var softplus(Var x) {
    return detail::unary_elementwise(
        "softplus", x,
        [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); },
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

/// Clamp to [lo, hi]; gradient passes only where the input was strictly inside.
inline Var clamp(Var x, double lo, double hi) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    Tensor Y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.size(); ++i) Y[i] = std::min(std::max(X[i], lo), hi);
    int ix = x.id();
    return t->push(std::move(Y), "clamp",
                   [ix, lo, hi](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& X = tp.node(ix).value;
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t i = 0; i < X.size(); ++i)
                           if (X[i] > lo && X[i] < hi) dx[i] += g[i];
                   });
}

/// Forward emits the hard 0/1 threshold; backward passes the upstream
/// gradient through unchanged (straight-through estimator).
inline Var straight_through_ge(Var x, double threshold) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    Tensor Y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.size(); ++i) Y[i] = X[i] >= threshold ? 1.0 : 0.0;
    int ix = x.id();
    return t->push(std::move(Y), "straight_through_ge",
                   [ix](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                   });
}

inline Var softmax_rows(Var x) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    Tensor Y(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        double m = X(r, 0);
        for (std::size_t c = 1; c < X.cols(); ++c) m = std::max(m, X(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < X.cols(); ++c) z += std::exp(X(r, c) - m);
        for (std::size_t c = 0; c < X.cols(); ++c) Y(r, c) = std::exp(X(r, c) - m) / z;
    }
    int ix = x.id();
    Var out = t->push(std::move(Y), "softmax_rows", nullptr);
    int iy = out.id();  // backward needs the output values
    t->node(iy).backprop = [ix, iy](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
        const Tensor& Y = tp.node(iy).value;
        Tensor& dx = tp.adj_of(adj, ix);
        for (std::size_t r = 0; r < Y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < Y.cols(); ++c) dot += g(r, c) * Y(r, c);
            for (std::size_t c = 0; c < Y.cols(); ++c)
                dx(r, c) += Y(r, c) * (g(r, c) - dot);
        }
    };
    return out;
}

/// Cosine similarity of each row of a with the matching row of b (or with
/// b's single row when b is 1xD). Rows with norm < 1e-12 score 0.
inline Var rowwise_cosine(Var a, Var b) {
    Tape* t = detail::same_tape("rowwise_cosine", a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    bool broadcast = B.rows() == 1 && A.rows() != 1;
    if (A.cols() != B.cols() || (!broadcast && A.rows() != B.rows()))
        throw NumericError(detail::concat("rowwise_cosine: shape mismatch (", A.shape_str(),
                                          " vs ", B.shape_str(), ")"));
    constexpr double kNormFloor = 1e-12;
    Tensor Y(A.rows(), 1);
    for (std::size_t r = 0; r < A.rows(); ++r) {
        std::size_t rb = broadcast ? 0 : r;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) {
            dot += A(r, c) * B(rb, c);
            na += A(r, c) * A(r, c);
            nb += B(rb, c) * B(rb, c);
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        Y(r, 0) = (na < kNormFloor || nb < kNormFloor) ? 0.0 : dot / (na * nb);
    }
    int ia = a.id(), ib = b.id();
    return t->push(std::move(Y), "rowwise_cosine",
                   [ia, ib, broadcast](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& A = tp.node(ia).value;
                       const Tensor& B = tp.node(ib).value;
                       Tensor& da = tp.adj_of(adj, ia);
                       Tensor& db = tp.adj_of(adj, ib);
                       constexpr double kNormFloor = 1e-12;
                       for (std::size_t r = 0; r < A.rows(); ++r) {
                           std::size_t rb = broadcast ? 0 : r;
                           double dot = 0.0, na2 = 0.0, nb2 = 0.0;
                           for (std::size_t c = 0; c < A.cols(); ++c) {
                               dot += A(r, c) * B(rb, c);
                               na2 += A(r, c) * A(r, c);
                               nb2 += B(rb, c) * B(rb, c);
                           }
                           double na = std::sqrt(na2), nb = std::sqrt(nb2);
                           if (na < kNormFloor || nb < kNormFloor) continue;
                           double y = dot / (na * nb);
                           double gr = g(r, 0);
                           if (gr == 0.0) continue;
                           for (std::size_t c = 0; c < A.cols(); ++c) {
                               da(r, c) += gr * (B(rb, c) / (na * nb) - y * A(r, c) / na2);
                               db(rb, c) += gr * (A(r, c) / (na * nb) - y * B(rb, c) / nb2);
                           }
                       }
                   });
}

namespace detail {

enum class Reduce { sum, mean, max };

inline Var reduce_rows(const char* op, Var x, Reduce kind) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    if (X.rows() == 0) throw NumericError(concat(op, ": empty input"));
    Tensor Y(1, X.cols());
    std::vector<std::size_t> argmax(kind == Reduce::max ? X.cols() : 0);
    for (std::size_t c = 0; c < X.cols(); ++c) {
        if (kind == Reduce::max) {
            double m = X(0, c);
            std::size_t mi = 0;
            for (std::size_t r = 1; r < X.rows(); ++r)
                if (X(r, c) > m) { m = X(r, c); mi = r; }
            Y(0, c) = m;
            argmax[c] = mi;
        } else {
            double s = 0.0;
            for (std::size_t r = 0; r < X.rows(); ++r) s += X(r, c);
            Y(0, c) = kind == Reduce::mean ? s / double(X.rows()) : s;
        }
    }
    int ix = x.id();
    double inv = 1.0 / double(X.rows());
    return t->push(std::move(Y), op,
                   [ix, kind, inv, argmax](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& X = tp.node(ix).value;
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t c = 0; c < X.cols(); ++c) {
                           if (kind == Reduce::max) {
                               dx(argmax[c], c) += g(0, c);
                           } else {
                               double gc = kind == Reduce::mean ? g(0, c) * inv : g(0, c);
                               for (std::size_t r = 0; r < X.rows(); ++r) dx(r, c) += gc;
                           }
                       }
                   });
}

}  // namespace detail

inline Var reduce_rows_sum(Var x) { return detail::reduce_rows("reduce_rows_sum", x, detail::Reduce::sum); }
inline Var reduce_rows_mean(Var x) { return detail::reduce_rows("reduce_rows_mean", x, detail::Reduce::mean); }
inline Var reduce_rows_max(Var x) { return detail::reduce_rows("reduce_rows_max", x, detail::Reduce::max); }

inline Var sum_all(Var x) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    double s = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) s += X[i];
    int ix = x.id();
    return t->push(Tensor(1, 1, s), "sum_all",
                   [ix](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[0];
                   });
}

inline Var mean_all(Var x) {
    if (x.value().size() == 0) throw NumericError("mean_all: empty input");
    return scalar_mul(sum_all(x), 1.0 / double(x.value().size()));
}

/// log sum exp over every entry, stabilized; output 1x1.
inline Var logsumexp_all(Var x) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    if (X.size() == 0) throw NumericError("logsumexp_all: empty input");
    double m = X[0];
    for (std::size_t i = 1; i < X.size(); ++i) m = std::max(m, X[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) z += std::exp(X[i] - m);
    int ix = x.id();
    return t->push(Tensor(1, 1, m + std::log(z)), "logsumexp_all",
                   [ix, m, z](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       const Tensor& X = tp.node(ix).value;
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t i = 0; i < X.size(); ++i)
                           dx[i] += g[0] * std::exp(X[i] - m) / z;
                   });
}

inline Var transpose(Var x) {
    Tape* t = x.tape();
    int ix = x.id();
    return t->push(x.value().transposed(), "transpose",
                   [ix](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t r = 0; r < g.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) dx(c, r) += g(r, c);
                   });
}

/// Select rows by index (duplicates allowed); backward scatter-adds.
inline Var gather_rows(Var x, std::vector<std::size_t> idx) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    for (std::size_t i : idx)
        if (i >= X.rows()) throw NumericError("gather_rows: index out of range");
    Tensor Y(idx.size(), X.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < X.cols(); ++c) Y(r, c) = X(idx[r], c);
    int ix = x.id();
    return t->push(std::move(Y), "gather_rows",
                   [ix, idx = std::move(idx)](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t r = 0; r < idx.size(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) dx(idx[r], c) += g(r, c);
                   });
}

/// Tile a 1xC row n times; backward column-sums.
inline Var repeat_rows(Var x, std::size_t n) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    if (X.rows() != 1) throw NumericError("repeat_rows: input must have one row");
    Tensor Y(n, X.cols());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < X.cols(); ++c) Y(r, c) = X(0, c);
    int ix = x.id();
    return t->push(std::move(Y), "repeat_rows",
                   [ix](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t r = 0; r < g.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) dx(0, c) += g(r, c);
                   });
}

/// Multiply row i by the fixed weight w[i].
inline Var scale_rows(Var x, std::vector<double> w) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    if (w.size() != X.rows()) throw NumericError("scale_rows: weight count != rows");
    Tensor Y(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r)
        for (std::size_t c = 0; c < X.cols(); ++c) Y(r, c) = w[r] * X(r, c);
    int ix = x.id();
    return t->push(std::move(Y), "scale_rows",
                   [ix, w = std::move(w)](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dx = tp.adj_of(adj, ix);
                       for (std::size_t r = 0; r < g.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c) dx(r, c) += w[r] * g(r, c);
                   });
}

/// Build a symmetric NxN adjacency (zero diagonal) from per-edge weights.
/// Entry (src[e], dst[e]) and its mirror both take w[e].
inline Var scatter_edges(Var w, const std::vector<std::size_t>& src,
                         const std::vector<std::size_t>& dst, std::size_t n) {
    Tape* t = w.tape();
    const Tensor& W = w.value();
    if (W.cols() != 1 || W.rows() != src.size() || src.size() != dst.size())
        throw NumericError("scatter_edges: weights must be Ex1 matching the edge lists");
    Tensor A(n, n);
    for (std::size_t e = 0; e < src.size(); ++e) {
        if (src[e] >= n || dst[e] >= n || src[e] == dst[e])
            throw NumericError("scatter_edges: bad edge endpoint");
        A(src[e], dst[e]) = W(e, 0);
        A(dst[e], src[e]) = W(e, 0);
    }
    int iw = w.id();
    return t->push(std::move(A), "scatter_edges",
                   [iw, src, dst](Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
                       Tensor& dw = tp.adj_of(adj, iw);
                       for (std::size_t e = 0; e < src.size(); ++e)
                           dw(e, 0) += g(src[e], dst[e]) + g(dst[e], src[e]);
                   });
}

/// L2-normalize each row; rows with norm < 1e-12 map to zero with zero
/// gradient.
inline Var normalize_rows(Var x) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    Tensor Y(X.rows(), X.cols());
    std::vector<double> norms(X.rows());
    constexpr double kFloor = 1e-12;
    for (std::size_t r = 0; r < X.rows(); ++r) {
        double n2 = 0.0;
        for (std::size_t c = 0; c < X.cols(); ++c) n2 += X(r, c) * X(r, c);
        norms[r] = std::sqrt(n2);
        if (norms[r] >= kFloor)
            for (std::size_t c = 0; c < X.cols(); ++c) Y(r, c) = X(r, c) / norms[r];
    }
    int ix = x.id();
    Var out = t->push(std::move(Y), "normalize_rows", nullptr);
    int iy = out.id();
    t->node(iy).backprop = [ix, iy, norms = std::move(norms)](Tape& tp, const Tensor& g,
                                                              std::vector<Tensor>& adj) {
        const Tensor& Y = tp.node(iy).value;
        Tensor& dx = tp.adj_of(adj, ix);
        constexpr double kFloor = 1e-12;
        for (std::size_t r = 0; r < Y.rows(); ++r) {
            if (norms[r] < kFloor) continue;
            double dot = 0.0;
            for (std::size_t c = 0; c < Y.cols(); ++c) dot += g(r, c) * Y(r, c);
            for (std::size_t c = 0; c < Y.cols(); ++c)
                dx(r, c) += (g(r, c) - Y(r, c) * dot) / norms[r];
        }
    };
    return out;
}

/// Column-wise zero-mean unit-variance normalization over the rows, with
/// epsilon inside the square root. Differentiable through mean and variance.
inline Var standardize_cols(Var x, double eps = 1e-5) {
    Tape* t = x.tape();
    const Tensor& X = x.value();
    std::size_t n = X.rows();
    if (n == 0) throw NumericError("standardize_cols: empty input");
    Tensor Y(n, X.cols());
    std::vector<double> mu(X.cols()), sd(X.cols());
    for (std::size_t c = 0; c < X.cols(); ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < n; ++r) m += X(r, c);
        m /= double(n);
        double v = 0.0;
        for (std::size_t r = 0; r < n; ++r) v += (X(r, c) - m) * (X(r, c) - m);
        v /= double(n);
        mu[c] = m;
        sd[c] = std::sqrt(v + eps);
        for (std::size_t r = 0; r < n; ++r) Y(r, c) = (X(r, c) - m) / sd[c];
    }
    int ix = x.id();
    Var out = t->push(std::move(Y), "standardize_cols", nullptr);
    int iy = out.id();
    t->node(iy).backprop = [ix, iy, mu = std::move(mu), sd = std::move(sd)](
                               Tape& tp, const Tensor& g, std::vector<Tensor>& adj) {
        const Tensor& Y = tp.node(iy).value;
        Tensor& dx = tp.adj_of(adj, ix);
        std::size_t n = Y.rows();
        for (std::size_t c = 0; c < Y.cols(); ++c) {
            double gmean = 0.0, gydot = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                gmean += g(r, c);
                gydot += g(r, c) * Y(r, c);
            }
            gmean /= double(n);
            gydot /= double(n);
            for (std::size_t r = 0; r < n; ++r)
                dx(r, c) += (g(r, c) - gmean - Y(r, c) * gydot) / sd[c];
        }
    };
    return out;
}

}  // namespace gcad
