#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "gcad/core.hpp"

namespace gcad {

/// Rank-based AUC (Mann-Whitney), ties counting one half. Abnormal (label 1)
/// is the positive class; higher scores rank as more anomalous. Returns
/// nullopt when only one class is present.
inline std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw Error("auc: scores/labels size mismatch");
    std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::size_t pos = 0, neg = 0;
    for (int y : labels) {
        if (y == 1) ++pos;
        else if (y == 0) ++neg;
        else throw Error("auc: labels must be 0 or 1");
    }
    if (pos == 0 || neg == 0) return std::nullopt;

    // Average ranks over tie groups.
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg = (double(i) + double(j)) / 2.0 + 1.0;  // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k] == 1) rank_sum += rank[k];
    double u = rank_sum - double(pos) * double(pos + 1) / 2.0;
    return u / (double(pos) * double(neg));
}

/// Average precision of the abnormal class over the descending-score ranking.
/// Ties are broken by ascending position (stable node-id order). Returns
/// nullopt when there is no abnormal node.
inline std::optional<double> average_precision(const std::vector<double>& scores,
                                               const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw Error("average_precision: size mismatch");
    std::size_t n = scores.size();
    std::size_t relevant = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error("average_precision: labels must be 0 or 1");
        relevant += (y == 1);
    }
    if (relevant == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double hits = 0.0, ap = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[order[k]] == 1) {
            hits += 1.0;
            ap += hits / double(k + 1);
        }
    }
    return ap / double(relevant);
}

struct GraphMetrics {
    std::string graph_id;
    std::optional<double> auc;
    std::optional<double> map;
};

struct MetricReport {
    std::vector<GraphMetrics> per_graph;
    std::optional<double> auc;       // unweighted mean over scorable graphs
    std::optional<double> map;
    std::size_t skipped_graphs = 0;  // one-class graphs

    void finalize() {
        double auc_sum = 0.0, map_sum = 0.0;
        std::size_t auc_n = 0, map_n = 0;
        skipped_graphs = 0;
        for (const GraphMetrics& g : per_graph) {
            if (g.auc) { auc_sum += *g.auc; ++auc_n; }
            if (g.map) { map_sum += *g.map; ++map_n; }
            if (!g.auc && !g.map) ++skipped_graphs;
        }
        if (auc_n) auc = auc_sum / double(auc_n);
        if (map_n) map = map_sum / double(map_n);
    }
};

}  // namespace gcad
