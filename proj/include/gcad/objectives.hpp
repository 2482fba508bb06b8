#pragma once

#include <optional>
#include <vector>

#include "gcad/autodiff.hpp"
#include "gcad/core.hpp"
#include "gcad/encoder.hpp"
#include "gcad/graph.hpp"

namespace gcad {

struct LossConfig {
    enum class Objective { contrastive, cross_entropy };

    double temperature = 0.1;      // tau in the contrastive loss
    double link_loss_weight = 0.2; // balance between the two losses
    Objective objective = Objective::contrastive;

    void validate() const {
        if (!(temperature > 0.0)) throw Error("LossConfig: temperature must be positive");
        if (link_loss_weight < 0.0) throw Error("LossConfig: link_loss_weight must be >= 0");
    }
};

/// Supervised infoNCE against the global context: mean over normal nodes i of
///   -log( exp(q.h_i/tau) / (sum_{j abnormal} exp(q.h_j/tau) + exp(q.h_i/tau)) )
/// computed through log-sum-exp. extra_negative_scores (kx1, already divided
/// by tau) extends every denominator — used for in-batch negatives.
inline Var contrastive_loss(Tape& tape, Var h, Var q, const std::vector<int>& labels, double tau,
                            std::optional<Var> extra_negative_scores = std::nullopt) {
    if (!(tau > 0.0)) throw Error("contrastive_loss: temperature must be positive");
    if (labels.size() != h.rows())
        throw Error(detail::concat("contrastive_loss: ", labels.size(), " labels for ", h.rows(),
                                   " embeddings"));
    std::vector<std::size_t> normal, abnormal;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kLabelNormal) normal.push_back(i);
        else if (labels[i] == kLabelAbnormal) abnormal.push_back(i);
    }
    if (normal.empty() || abnormal.empty())
        throw OneClassGraph(detail::concat("contrastive_loss: graph has ", normal.size(),
                                           " normal and ", abnormal.size(),
                                           " abnormal labeled nodes; skip it"));
    (void)tape;

    Var scores = scalar_mul(matmul(h, transpose(q)), 1.0 / tau);  // Nx1
    Var negatives = gather_rows(scores, abnormal);
    if (extra_negative_scores) negatives = concat_rows(negatives, *extra_negative_scores);

    Var total;
    for (std::size_t i : normal) {
        Var si = gather_rows(scores, {i});
        Var lse = logsumexp_all(concat_rows(negatives, si));
        Var term = sub(lse, si);
        total = total.valid() ? add(total, term) : term;
    }
    return scalar_mul(total, 1.0 / double(normal.size()));
}

struct LinkLossResult {
    Var loss;                 // 1x1, zero when no labeled edges exist
    bool any_labeled_edges = false;
};

/// Link-predictor constraint: per layer, mean -log p over normal-normal edges
/// plus mean -log(1-p) over suspicious (normal-abnormal) edges, averaged over
/// layers. Edges with an unlabeled endpoint and abnormal-abnormal edges are
/// skipped.
inline LinkLossResult link_loss(Tape& tape, const ForwardResult& fwd,
                                const std::vector<int>& labels) {
    LinkLossResult out;
    Var total;
    std::size_t layer_count = fwd.layers.size();
    for (const LayerTrace& trace : fwd.layers) {
        if (!trace.likelihood.valid()) continue;
        std::vector<std::size_t> normal_edges, suspicious_edges;
        for (std::size_t e = 0; e < trace.src.size(); ++e) {
            int yi = labels[trace.src[e]];
            int yj = labels[trace.dst[e]];
            if (yi == kLabelUnknown || yj == kLabelUnknown) continue;
            if (yi == kLabelNormal && yj == kLabelNormal) normal_edges.push_back(e);
            else if (yi != yj) suspicious_edges.push_back(e);
        }
        if (normal_edges.empty() && suspicious_edges.empty()) continue;
        out.any_labeled_edges = true;
        Var layer_term;
        if (!normal_edges.empty()) {
            Var p = gather_rows(trace.likelihood, normal_edges);
            layer_term = scalar_mul(mean_all(log_op(p)), -1.0);
        }
        if (!suspicious_edges.empty()) {
            Var p = gather_rows(trace.likelihood, suspicious_edges);
            Var one_minus = sub(tape.constant(Tensor(p.rows(), 1, 1.0)), p);
            Var term = scalar_mul(mean_all(log_op(one_minus)), -1.0);
            layer_term = layer_term.valid() ? add(layer_term, term) : term;
        }
        total = total.valid() ? add(total, layer_term) : layer_term;
    }
    if (!total.valid()) {
        out.loss = tape.constant(Tensor(1, 1, 0.0));
        return out;
    }
    out.loss = scalar_mul(total, 1.0 / double(layer_count));
    return out;
}

/// Binary cross-entropy baseline: affine head + sigmoid over labeled nodes.
/// The ranking score for evaluation is the predicted abnormal probability.
inline Var cross_entropy_loss(Tape& tape, Var h, const std::vector<int>& labels, Var ce_w,
                              Var ce_b) {
    std::vector<std::size_t> labeled;
    std::vector<double> y;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kLabelUnknown) {
            labeled.push_back(i);
            y.push_back(double(labels[i]));
        }
    if (labeled.empty()) throw Error("cross_entropy_loss: no labeled nodes");
    Var z = add(matmul(gather_rows(h, labeled), ce_w), ce_b);  // kx1 logits
    Var yc = tape.constant(Tensor::col_vector(y));
    // -[y log s(z) + (1-y) log(1-s(z))] == softplus(z) - y*z
    return mean_all(sub(softplus(z), hadamard(yc, z)));
}

struct LossNodes {
    Var objective;   // contrastive or cross-entropy, per config
    Var link;        // 1x1 (zero when no labeled edges)
    Var combined;    // objective + weight * link
    bool link_edges_found = false;
};

struct LossValues {
    double objective = 0.0;
    double link = 0.0;
    double combined = 0.0;
    bool link_edges_found = false;
};

/// L = L_con + lambda * L_link (or the cross-entropy variant of the first
/// term). Labels default to the graph's own; pass a masked copy to restrict
/// the loss to a training split.
inline LossNodes combined_loss(Tape& tape, const ForwardResult& fwd, const BoundParams& params,
                               const std::vector<int>& labels, const LossConfig& cfg,
                               std::optional<Var> extra_negative_scores = std::nullopt) {
    cfg.validate();
    LossNodes out;
    if (cfg.objective == LossConfig::Objective::contrastive)
        // Embeddings and context are L2-normalized first so q.h is the cosine
        // the inference rule ranks by.
        out.objective = contrastive_loss(tape, normalize_rows(fwd.embeddings()),
                                         normalize_rows(fwd.context()), labels, cfg.temperature,
                                         extra_negative_scores);
    else
        out.objective = cross_entropy_loss(tape, fwd.embeddings(), labels, params.ce_w, params.ce_b);

    LinkLossResult ll = link_loss(tape, fwd, labels);
    out.link = ll.loss;
    out.link_edges_found = ll.any_labeled_edges;
    out.combined = cfg.link_loss_weight == 0.0
                       ? out.objective
                       : add(out.objective, scalar_mul(out.link, cfg.link_loss_weight));
    return out;
}

inline LossValues loss_values(const LossNodes& nodes) {
    LossValues v;
    v.objective = nodes.objective.value()(0, 0);
    v.link = nodes.link.value()(0, 0);
    v.combined = nodes.combined.value()(0, 0);
    v.link_edges_found = nodes.link_edges_found;
    return v;
}

}  // namespace gcad
