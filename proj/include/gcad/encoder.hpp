#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcad/autodiff.hpp"
#include "gcad/core.hpp"
#include "gcad/graph.hpp"
#include "gcad/rng.hpp"

namespace gcad {

struct ModelConfig {
    enum class Aggregator { mean, sum };          // GCN-style vs GIN-style
    enum class EdgeMode { full, no_global, none };
    enum class Readout { memory, mean, sum, max };

    int num_layers = 2;
    int input_dim = 0;
    std::vector<int> hidden_dims;  // one per layer; defaulted to 64s if empty
    Aggregator aggregator = Aggregator::mean;
    double gumbel_temperature = 0.6;
    bool keep_self_loops_in_readout = false;
    EdgeMode edge_mode = EdgeMode::full;
    Readout readout = Readout::memory;

    void validate() const {
        if (num_layers < 1) throw Error("ModelConfig: num_layers must be >= 1");
        if (input_dim < 1) throw Error("ModelConfig: input_dim must be >= 1");
        if (int(hidden_dims.size()) != num_layers)
            throw Error(detail::concat("ModelConfig: ", hidden_dims.size(), " hidden dims for ",
                                       num_layers, " layers"));
        for (int d : hidden_dims)
            if (d < 1) throw Error("ModelConfig: hidden dims must be positive");
        if (!(gumbel_temperature > 0.0))
            throw Error("ModelConfig: gumbel_temperature must be positive");
    }

    ModelConfig with_defaults() const {
        ModelConfig c = *this;
        if (c.hidden_dims.empty()) c.hidden_dims.assign(std::size_t(c.num_layers), 64);
        return c;
    }

    int layer_in_dim(int layer) const {
        return layer == 0 ? input_dim : hidden_dims[std::size_t(layer) - 1];
    }
    int layer_out_dim(int layer) const { return hidden_dims[std::size_t(layer)]; }
    int link_input_dim(int layer) const {
        return edge_mode == EdgeMode::no_global ? layer_in_dim(layer) : 3 * layer_in_dim(layer);
    }
};

/// Per-layer learnables: the link-predictor MLP (3D -> D relu, D -> 1
/// sigmoid), the node-update MLP, and the raw residual-mixing scalar
/// (effective alpha = sigmoid(raw), so initializing raw=0 gives 0.5).
struct LayerParams {
    Tensor link_w1, link_b1, link_w2, link_b2;
    Tensor node_w1, node_b1, node_w2, node_b2;
    Tensor alpha_raw;  // 1x1
};

struct ModelParams {
    ModelConfig config;
    std::vector<LayerParams> layers;
    Tensor ce_w, ce_b;  // classifier head for the cross-entropy baseline

    static ModelParams init(const ModelConfig& cfg_in, Rng& rng) {
        ModelConfig cfg = cfg_in.with_defaults();
        cfg.validate();
        ModelParams p;
        p.config = cfg;
        auto glorot = [&rng](std::size_t rows, std::size_t cols) {
            Tensor t(rows, cols);
            double lim = std::sqrt(6.0 / double(rows + cols));
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-lim, lim);
            return t;
        };
        // Small random biases keep relu inputs off the exact kink even for
        // all-zero embedding rows (isolated nodes), which matters for
        // finite-difference checks.
        auto bias = [&rng](std::size_t cols) {
            Tensor t(1, cols);
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.1, 0.1);
            return t;
        };
        for (int l = 0; l < cfg.num_layers; ++l) {
            std::size_t din = std::size_t(cfg.layer_in_dim(l));
            std::size_t dout = std::size_t(cfg.layer_out_dim(l));
            std::size_t lin = std::size_t(cfg.link_input_dim(l));
            LayerParams lp;
            lp.link_w1 = glorot(lin, din);
            lp.link_b1 = bias(din);
            lp.link_w2 = glorot(din, 1);
            // Keep-biased start (p ~ 0.73): an untrained predictor passes
            // edges through instead of thinning them at the 0.5 threshold.
            lp.link_b2 = bias(1);
            lp.link_b2(0, 0) += 1.0;
            lp.node_w1 = glorot(2 * din, dout);
            lp.node_b1 = bias(dout);
            lp.node_w2 = glorot(dout, dout);
            lp.node_b2 = bias(dout);
            lp.alpha_raw = Tensor(1, 1);
            p.layers.push_back(std::move(lp));
        }
        p.ce_w = glorot(std::size_t(cfg.hidden_dims.back()), 1);
        p.ce_b = bias(1);
        return p;
    }

    std::vector<std::pair<std::string, Tensor*>> named_tensors() {
        std::vector<std::pair<std::string, Tensor*>> out;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            std::string pre = detail::concat("layer", l, ".");
            out.emplace_back(pre + "link_w1", &layers[l].link_w1);
            out.emplace_back(pre + "link_b1", &layers[l].link_b1);
            out.emplace_back(pre + "link_w2", &layers[l].link_w2);
            out.emplace_back(pre + "link_b2", &layers[l].link_b2);
            out.emplace_back(pre + "node_w1", &layers[l].node_w1);
            out.emplace_back(pre + "node_b1", &layers[l].node_b1);
            out.emplace_back(pre + "node_w2", &layers[l].node_w2);
            out.emplace_back(pre + "node_b2", &layers[l].node_b2);
            out.emplace_back(pre + "alpha", &layers[l].alpha_raw);
        }
        out.emplace_back("ce.w", &ce_w);
        out.emplace_back("ce.b", &ce_b);
        return out;
    }

    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const {
        auto mut = const_cast<ModelParams*>(this)->named_tensors();
        std::vector<std::pair<std::string, const Tensor*>> out;
        for (auto& [n, t] : mut) out.emplace_back(n, t);
        return out;
    }
};

/// Parameters mirrored as leaves on a tape for one forward/backward pass.
struct BoundParams {
    const ModelConfig* config = nullptr;
    struct BoundLayer {
        Var link_w1, link_b1, link_w2, link_b2;
        Var node_w1, node_b1, node_w2, node_b2;
        Var alpha_raw;
    };
    std::vector<BoundLayer> layers;
    Var ce_w, ce_b;

    static BoundParams bind(Tape& tape, const ModelParams& p) {
        BoundParams b;
        b.config = &p.config;
        for (const LayerParams& lp : p.layers) {
            BoundLayer bl;
            bl.link_w1 = tape.leaf(lp.link_w1);
            bl.link_b1 = tape.leaf(lp.link_b1);
            bl.link_w2 = tape.leaf(lp.link_w2);
            bl.link_b2 = tape.leaf(lp.link_b2);
            bl.node_w1 = tape.leaf(lp.node_w1);
            bl.node_b1 = tape.leaf(lp.node_b1);
            bl.node_w2 = tape.leaf(lp.node_w2);
            bl.node_b2 = tape.leaf(lp.node_b2);
            bl.alpha_raw = tape.leaf(lp.alpha_raw);
            b.layers.push_back(bl);
        }
        b.ce_w = tape.leaf(p.ce_w);
        b.ce_b = tape.leaf(p.ce_b);
        return b;
    }

    /// Same order as ModelParams::named_tensors.
    std::vector<Var> all_vars() const {
        std::vector<Var> out;
        for (const BoundLayer& l : layers)
            for (Var v : {l.link_w1, l.link_b1, l.link_w2, l.link_b2, l.node_w1, l.node_b1,
                          l.node_w2, l.node_b2, l.alpha_raw})
                out.push_back(v);
        out.push_back(ce_w);
        out.push_back(ce_b);
        return out;
    }
};

enum class RunMode { train, eval };

struct LayerTrace {
    std::vector<std::size_t> src, dst;  // edges scored at this layer
    Var likelihood;                     // Ex1 symmetrized link likelihoods (invalid if no edges)
    std::vector<double> keep_mask;      // discrete I per scored edge
    Var adjacency;                      // NxN after the edge update
    Var embeddings;                     // H^(l)
    Var context;                        // q^(l)
    std::vector<double> attention;      // readout weights (memory readout only)
};

struct ForwardStats {
    std::vector<std::size_t> edges_scored;  // per layer
    std::vector<std::size_t> readout_rows;  // per layer
};

struct ForwardResult {
    Var input;  // X as a constant node
    Var q0;
    std::vector<LayerTrace> layers;
    ForwardStats stats;

    Var embeddings() const { return layers.back().embeddings; }
    Var context() const { return layers.back().context; }
};

/// Algorithm-1 context initialization: q0 is the column mean of the features.
inline Var init_context(Tape& tape, Var features) {
    (void)tape;
    return reduce_rows_mean(features);
}

/// Scalar Gumbel keep decision used by tests and Monte-Carlo checks.
/// Returns {discrete I, relaxed r} for one likelihood.
inline std::pair<double, double> gumbel_keep_scalar(double p, double lambda_g, double eps) {
    if (!(lambda_g > 0.0)) throw Error("gumbel_keep: temperature must be positive");
    p = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
    double z = (std::log(p) + eps) / lambda_g;
    double r = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return {r >= 0.5 ? 1.0 : 0.0, r};
}

namespace detail {

inline Var link_mlp(Var x, const BoundParams::BoundLayer& lp) {
    Var h = relu(add(matmul(x, lp.link_w1), lp.link_b1));
    return sigmoid(add(matmul(h, lp.link_w2), lp.link_b2));
}

}  // namespace detail

/// Symmetrized context-aware link likelihoods for the given edges:
/// p_ij = (MLP(in_ij) + MLP(in_ji)) / 2 with in_ij the concatenation
/// (h_i - h_j) (+) (h_i - q) (+) (h_j - q), clamped to [1e-6, 1-1e-6].
inline Var link_likelihoods(Tape& tape, Var h, Var q, const BoundParams::BoundLayer& lp,
                            const std::vector<std::size_t>& src,
                            const std::vector<std::size_t>& dst,
                            ModelConfig::EdgeMode edge_mode) {
    Var hs = gather_rows(h, src);
    Var hd = gather_rows(h, dst);
    Var p_fwd, p_bwd;
    if (edge_mode == ModelConfig::EdgeMode::no_global) {
        p_fwd = detail::link_mlp(sub(hs, hd), lp);
        p_bwd = detail::link_mlp(sub(hd, hs), lp);
    } else {
        Var qe = repeat_rows(q, src.size());
        p_fwd = detail::link_mlp(concat_cols(sub(hs, hd), concat_cols(sub(hs, qe), sub(hd, qe))), lp);
        p_bwd = detail::link_mlp(concat_cols(sub(hd, hs), concat_cols(sub(hd, qe), sub(hs, qe))), lp);
    }
    (void)tape;
    return clamp(scalar_mul(add(p_fwd, p_bwd), 0.5), 1e-6, 1.0 - 1e-6);
}

struct EdgeDecision {
    Var likelihood;             // Ex1 (clamped)
    Var mask;                   // Ex1: straight-through in train, constant otherwise
    Var new_weights;            // Ex1: (alpha*w_prev + (1-alpha)*p) * I
    Var adjacency;              // NxN scatter of new_weights
    std::vector<double> keep;   // mask values
};

/// One edge update: Gumbel keep/drop per edge plus the residual reweighting.
/// In train mode the mask is sampled (straight-through backward); in eval
/// mode it is the deterministic threshold [p >= 0.5]; a frozen mask replaces
/// both when provided.
inline EdgeDecision edge_update(Tape& tape, Var p, Var prev_weights, Var alpha_raw,
                                const std::vector<std::size_t>& src,
                                const std::vector<std::size_t>& dst, std::size_t n,
                                double lambda_g, RunMode mode, Rng* rng,
                                const std::vector<double>* frozen_mask) {
    std::size_t e = src.size();
    EdgeDecision out;
    out.likelihood = p;

    if (frozen_mask) {
        if (frozen_mask->size() != e) throw Error("edge_update: frozen mask length mismatch");
        out.mask = tape.constant(Tensor::col_vector(*frozen_mask));
    } else if (mode == RunMode::train) {
        if (!rng) throw Error("edge_update: train mode needs an rng");
        Tensor eps(e, 1);
        for (std::size_t i = 0; i < e; ++i) eps(i, 0) = rng->gumbel();
        Var relaxed = sigmoid(scalar_mul(add(log_op(p), tape.constant(std::move(eps))),
                                         1.0 / lambda_g));
        out.mask = straight_through_ge(relaxed, 0.5);
    } else {
        Tensor hard(e, 1);
        for (std::size_t i = 0; i < e; ++i) hard(i, 0) = p.value()(i, 0) >= 0.5 ? 1.0 : 0.0;
        out.mask = tape.constant(std::move(hard));
    }

    Var alpha = sigmoid(alpha_raw);
    Var one_minus = sub(tape.constant(Tensor(1, 1, 1.0)), alpha);
    out.new_weights = hadamard(add(scale_by(alpha, prev_weights), scale_by(one_minus, p)), out.mask);
    out.adjacency = scatter_edges(out.new_weights, src, dst, n);
    out.keep.resize(e);
    for (std::size_t i = 0; i < e; ++i) out.keep[i] = out.mask.value()(i, 0);
    return out;
}

/// Message passing: weighted aggregation over kept neighbors followed by the
/// combine MLP, feature standardization and relu. neighbor_counts drives the
/// mean aggregator and must count strictly positive incident weights.
inline Var node_update(Tape& tape, Var h, Var adjacency, const std::vector<double>& neighbor_counts,
                       const BoundParams::BoundLayer& lp, ModelConfig::Aggregator agg,
                       bool self_loops) {
    Var a = adjacency;
    if (self_loops) a = add(a, tape.constant(Tensor::identity(h.rows())));
    Var msg = matmul(a, h);
    if (agg == ModelConfig::Aggregator::mean) {
        std::vector<double> inv(neighbor_counts.size());
        for (std::size_t i = 0; i < inv.size(); ++i) {
            double c = neighbor_counts[i] + (self_loops ? 1.0 : 0.0);
            inv[i] = c > 0.0 ? 1.0 / c : 0.0;
        }
        msg = scale_rows(msg, inv);
    }
    Var combined = concat_cols(h, msg);
    Var z = relu(add(matmul(combined, lp.node_w1), lp.node_b1));
    z = add(matmul(z, lp.node_w2), lp.node_b2);
    return relu(standardize_cols(z));
}

struct ReadoutResult {
    Var context;
    std::vector<double> attention;
};

/// Memory readout (Eq.-12 block): cosine attention against the memory vector,
/// then a convex combination of the rows of H. Mean / sum / max pooling are
/// the ablation variants. When the memory's width differs from H (a layer
/// changed dimensionality) the key falls back to the mean of H.
inline ReadoutResult graph_update(Tape& tape, Var h, Var memory, ModelConfig::Readout readout) {
    (void)tape;
    ReadoutResult out;
    switch (readout) {
        case ModelConfig::Readout::mean:
            out.context = reduce_rows_mean(h);
            return out;
        case ModelConfig::Readout::sum:
            out.context = reduce_rows_sum(h);
            return out;
        case ModelConfig::Readout::max:
            out.context = reduce_rows_max(h);
            return out;
        case ModelConfig::Readout::memory:
            break;
    }
    Var key = (memory.valid() && memory.cols() == h.cols()) ? memory : reduce_rows_mean(h);
    Var scores = rowwise_cosine(h, key);
    Var attn = softmax_rows(transpose(scores));  // 1xN
    out.context = matmul(attn, h);
    out.attention.resize(attn.cols());
    for (std::size_t i = 0; i < attn.cols(); ++i) out.attention[i] = attn.value()(0, i);
    return out;
}

/// Full L-layer forward pass: edge update -> node update -> graph update per
/// layer. Deterministic given the rng seed; eval mode needs no rng at all.
/// frozen_masks (one vector per layer, matching that layer's scored edges)
/// pin the discrete keep decisions, which gradient checks rely on.
inline ForwardResult encoder_forward(Tape& tape, const Graph& g, const BoundParams& params,
                                     RunMode mode, Rng* rng = nullptr,
                                     const std::vector<std::vector<double>>* frozen_masks = nullptr) {
    const ModelConfig& cfg = *params.config;
    if (g.num_nodes() < 1) throw Error("encoder_forward: empty graph");
    if (int(g.feature_dim()) != cfg.input_dim)
        throw Error(detail::concat("encoder_forward: graph feature dim ", g.feature_dim(),
                                   " != config input_dim ", cfg.input_dim));

    ForwardResult res;
    res.input = tape.constant(g.features);
    res.q0 = init_context(tape, res.input);

    std::size_t n = g.num_nodes();
    std::vector<EdgeRef> original = g.edges();
    std::vector<std::size_t> src, dst;
    std::vector<double> weights;
    for (const EdgeRef& e : original) {
        src.push_back(e.src);
        dst.push_back(e.dst);
        weights.push_back(e.weight);
    }

    Var h = res.input;
    Var q = res.q0;
    Var memory = res.q0;
    Var prev_weights = src.empty() ? Var{} : tape.constant(Tensor::col_vector(weights));
    bool edges_live = cfg.edge_mode != ModelConfig::EdgeMode::none && !src.empty();

    for (int l = 0; l < cfg.num_layers; ++l) {
        const BoundParams::BoundLayer& lp = params.layers[std::size_t(l)];
        LayerTrace trace;
        Var adjacency;
        std::vector<double> counts(n, 0.0);

        if (edges_live) {
            trace.src = src;
            trace.dst = dst;
            Var p = link_likelihoods(tape, h, q, lp, src, dst, cfg.edge_mode);
            const std::vector<double>* frozen =
                frozen_masks ? &(*frozen_masks)[std::size_t(l)] : nullptr;
            EdgeDecision dec = edge_update(tape, p, prev_weights, lp.alpha_raw, src, dst, n,
                                           cfg.gumbel_temperature, mode, rng, frozen);
            trace.likelihood = dec.likelihood;
            trace.keep_mask = dec.keep;
            adjacency = dec.adjacency;
            for (std::size_t e = 0; e < src.size(); ++e)
                if (dec.keep[e] > 0.0) {
                    counts[src[e]] += 1.0;
                    counts[dst[e]] += 1.0;
                }
            res.stats.edges_scored.push_back(src.size());

            // Only surviving edges exist for the next layer.
            std::vector<std::size_t> kept;
            for (std::size_t e = 0; e < src.size(); ++e)
                if (dec.keep[e] > 0.0) kept.push_back(e);
            std::vector<std::size_t> nsrc, ndst;
            for (std::size_t e : kept) {
                nsrc.push_back(src[e]);
                ndst.push_back(dst[e]);
            }
            if (!kept.empty()) prev_weights = gather_rows(dec.new_weights, kept);
            src = std::move(nsrc);
            dst = std::move(ndst);
            edges_live = !src.empty();
        } else {
            // Edge update disabled (ablation) or no edges left: adjacency is
            // carried unchanged.
            Tensor a(n, n);
            if (cfg.edge_mode == ModelConfig::EdgeMode::none)
                for (std::size_t e = 0; e < src.size(); ++e) {
                    a(src[e], dst[e]) = weights[e];
                    a(dst[e], src[e]) = weights[e];
                    counts[src[e]] += 1.0;
                    counts[dst[e]] += 1.0;
                }
            adjacency = tape.constant(std::move(a));
            res.stats.edges_scored.push_back(0);
        }
        trace.adjacency = adjacency;

        h = node_update(tape, h, adjacency, counts, lp, cfg.aggregator,
                        cfg.keep_self_loops_in_readout);
        ReadoutResult ro = graph_update(tape, h, memory, cfg.readout);
        q = ro.context;
        memory = q;
        res.stats.readout_rows.push_back(n);

        trace.embeddings = h;
        trace.context = q;
        trace.attention = std::move(ro.attention);
        res.layers.push_back(std::move(trace));
    }
    return res;
}

}  // namespace gcad
