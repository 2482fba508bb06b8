#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcad/core.hpp"

namespace gcad {

constexpr int kLabelUnknown = -1;
constexpr int kLabelNormal = 0;
constexpr int kLabelAbnormal = 1;

struct EdgeRef {
    std::size_t src, dst;  // src < dst
    double weight;
};

/// A single attributed graph: features, symmetric weighted adjacency with a
/// zero diagonal, and optional per-node labels (-1 = unlabeled).
struct Graph {
    std::string id;
    Tensor features;    // N x d
    Tensor adjacency;   // N x N
    std::vector<int> labels;  // size N, entries in {-1, 0, 1}

    std::size_t num_nodes() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }

    bool has_labels() const {
        for (int y : labels)
            if (y != kLabelUnknown) return true;
        return false;
    }

    std::size_t count_label(int y) const {
        std::size_t n = 0;
        for (int v : labels) n += (v == y);
        return n;
    }

    /// Undirected edges listed once with src < dst and weight > 0.
    std::vector<EdgeRef> edges() const {
        std::vector<EdgeRef> out;
        for (std::size_t i = 0; i < num_nodes(); ++i)
            for (std::size_t j = i + 1; j < num_nodes(); ++j)
                if (adjacency(i, j) > 0.0) out.push_back({i, j, adjacency(i, j)});
        return out;
    }

    void validate() const {
        std::size_t n = num_nodes();
        if (adjacency.rows() != n || adjacency.cols() != n)
            throw ParseError(detail::concat("graph '", id, "': adjacency is ",
                                            adjacency.shape_str(), " but the graph has ", n,
                                            " nodes"));
        if (labels.size() != n)
            throw ParseError(detail::concat("graph '", id, "': ", labels.size(), " labels for ",
                                            n, " nodes"));
        if (!features.all_finite() || !adjacency.all_finite())
            throw ParseError(detail::concat("graph '", id, "': non-finite entries"));
        for (std::size_t i = 0; i < n; ++i) {
            if (adjacency(i, i) != 0.0)
                throw ParseError(detail::concat("graph '", id, "': nonzero diagonal at node ", i));
            for (std::size_t j = i + 1; j < n; ++j) {
                if (std::fabs(adjacency(i, j) - adjacency(j, i)) > 1e-12)
                    throw ParseError(detail::concat("graph '", id, "': asymmetric adjacency at (",
                                                    i, ",", j, ")"));
                if (adjacency(i, j) < 0.0)
                    throw ParseError(detail::concat("graph '", id, "': negative weight at (", i,
                                                    ",", j, ")"));
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] != kLabelUnknown && labels[i] != kLabelNormal && labels[i] != kLabelAbnormal)
                throw ParseError(detail::concat("graph '", id, "': label ", labels[i],
                                                " at node ", i, " outside {-1,0,1}"));
    }
};

/// Train/valid/test assignment: graph ids in multi-graph mode, node ids in
/// single-graph mode.
struct Split {
    std::vector<std::string> train_graphs, valid_graphs, test_graphs;
    std::vector<std::size_t> train_nodes, valid_nodes, test_nodes;

    bool empty() const {
        return train_graphs.empty() && valid_graphs.empty() && test_graphs.empty() &&
               train_nodes.empty() && valid_nodes.empty() && test_nodes.empty();
    }
};

struct Dataset {
    enum class Mode { multi, single };

    Mode mode = Mode::multi;
    std::vector<Graph> graphs;
    Split split;

    std::size_t feature_dim() const { return graphs.empty() ? 0 : graphs[0].feature_dim(); }

    const Graph* find(const std::string& id) const {
        for (const Graph& g : graphs)
            if (g.id == id) return &g;
        return nullptr;
    }

    void validate() const {
        if (mode == Mode::multi && graphs.size() < 2)
            throw ParseError("multi-graph dataset needs at least 2 graphs");
        if (mode == Mode::single && graphs.size() != 1)
            throw ParseError(detail::concat("single-graph dataset must have exactly 1 graph, got ",
                                            graphs.size()));
        for (const Graph& g : graphs) {
            g.validate();
            if (g.feature_dim() != feature_dim())
                throw ParseError(detail::concat("graph '", g.id, "': feature dim ",
                                                g.feature_dim(), " != dataset dim ",
                                                feature_dim()));
        }
        validate_split();
    }

    void validate_split() const {
        if (split.empty()) return;
        if (mode == Mode::multi) {
            std::vector<std::string> seen;
            for (const auto* part : {&split.train_graphs, &split.valid_graphs, &split.test_graphs})
                for (const std::string& id : *part) {
                    if (!find(id))
                        throw ParseError(detail::concat("split references unknown graph '", id, "'"));
                    for (const std::string& s : seen)
                        if (s == id)
                            throw ParseError(detail::concat("graph '", id, "' in multiple splits"));
                    seen.push_back(id);
                }
            if (seen.size() != graphs.size())
                throw ParseError(detail::concat("split covers ", seen.size(), " of ",
                                                graphs.size(), " graphs"));
        } else {
            const Graph& g = graphs[0];
            std::vector<bool> seen(g.num_nodes(), false);
            std::size_t assigned = 0;
            for (const auto* part : {&split.train_nodes, &split.valid_nodes, &split.test_nodes})
                for (std::size_t v : *part) {
                    if (v >= g.num_nodes())
                        throw ParseError(detail::concat("split references node ", v, " >= N=",
                                                        g.num_nodes()));
                    if (g.labels[v] == kLabelUnknown)
                        throw ParseError(detail::concat("split assigns unlabeled node ", v));
                    if (seen[v]) throw ParseError(detail::concat("node ", v, " in multiple splits"));
                    seen[v] = true;
                    ++assigned;
                }
            std::size_t labeled = g.count_label(0) + g.count_label(1);
            if (assigned != labeled)
                throw ParseError(detail::concat("split covers ", assigned, " of ", labeled,
                                                " labeled nodes"));
        }
    }
};

}  // namespace gcad
