#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gcad/checkpoint.hpp"
#include "gcad/dataset_io.hpp"
#include "gcad/encoder.hpp"
#include "gcad/graph.hpp"
#include "gcad/metrics.hpp"
#include "gcad/objectives.hpp"

namespace gcad {

struct ScoreRow {
    std::string graph_id;
    std::size_t node_id;
    double score;  // higher = more anomalous
    int label;
};

using ScoreTable = std::vector<ScoreRow>;

struct ScoredGraph {
    ScoreTable rows;          // labeled nodes only (optionally filtered further)
    Tensor embeddings;        // H^(L), all nodes
    Tensor context;           // q^(L)
};

/// Deterministic eval-mode scoring. The contrastive objective scores
/// 1 - cosine(h_i, q); the cross-entropy baseline scores the predicted
/// abnormal probability. node_filter (if given) restricts the table.
inline ScoredGraph score_graph(const Graph& g, const ModelParams& params,
                               LossConfig::Objective objective = LossConfig::Objective::contrastive,
                               const std::vector<std::size_t>* node_filter = nullptr) {
    Tape tape;
    BoundParams bound = BoundParams::bind(tape, params);
    ForwardResult fwd = encoder_forward(tape, g, bound, RunMode::eval);

    ScoredGraph out;
    out.embeddings = fwd.embeddings().value();
    out.context = fwd.context().value();

    std::vector<double> all_scores(g.num_nodes());
    if (objective == LossConfig::Objective::contrastive) {
        Var cos = rowwise_cosine(fwd.embeddings(), fwd.context());
        for (std::size_t i = 0; i < g.num_nodes(); ++i) all_scores[i] = 1.0 - cos.value()(i, 0);
    } else {
        Var z = add(matmul(fwd.embeddings(), bound.ce_w), bound.ce_b);
        Var p = sigmoid(z);
        for (std::size_t i = 0; i < g.num_nodes(); ++i) all_scores[i] = p.value()(i, 0);
    }

    std::vector<bool> wanted(g.num_nodes(), node_filter == nullptr);
    if (node_filter)
        for (std::size_t v : *node_filter) wanted[v] = true;
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        if (wanted[i] && g.labels[i] != kLabelUnknown)
            out.rows.push_back({g.id, i, all_scores[i], g.labels[i]});
    return out;
}

inline GraphMetrics metrics_for(const std::string& graph_id, const ScoreTable& rows) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const ScoreRow& r : rows)
        if (r.graph_id == graph_id) {
            scores.push_back(r.score);
            labels.push_back(r.label);
        }
    GraphMetrics m;
    m.graph_id = graph_id;
    if (!scores.empty()) {
        m.auc = auc(scores, labels);
        m.map = average_precision(scores, labels);
    }
    return m;
}

inline MetricReport metrics_for_table(const ScoreTable& rows) {
    std::vector<std::string> ids;
    for (const ScoreRow& r : rows)
        if (std::find(ids.begin(), ids.end(), r.graph_id) == ids.end()) ids.push_back(r.graph_id);
    MetricReport rep;
    for (const std::string& id : ids) rep.per_graph.push_back(metrics_for(id, rows));
    rep.finalize();
    return rep;
}

inline void write_scores_csv(const ScoreTable& rows, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error(detail::concat("cannot write ", path.string()));
    os << "graph_id,node_id,score,label\n";
    for (const ScoreRow& r : rows)
        os << r.graph_id << "," << r.node_id << "," << detail::format_double(r.score) << ","
           << r.label << "\n";
}

inline ScoreTable read_scores_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError(detail::concat("missing file: ", path.string()));
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line) ||
        detail::split_csv_line(line) != std::vector<std::string>{"graph_id", "node_id", "score", "label"})
        throw ParseError(detail::concat(path.string(), ":1: expected header 'graph_id,node_id,score,label'"));
    ScoreTable rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 4)
            throw ParseError(detail::concat(path.string(), ":", lineno, ": expected 4 fields"));
        ScoreRow r;
        r.graph_id = f[0];
        r.node_id = std::size_t(detail::parse_long(f[1], path.string(), lineno));
        r.score = detail::parse_double(f[2], path.string(), lineno);
        long lab = detail::parse_long(f[3], path.string(), lineno);
        if (lab != 0 && lab != 1)
            throw ParseError(detail::concat(path.string(), ":", lineno, ": label must be 0 or 1"));
        r.label = int(lab);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace gcad
