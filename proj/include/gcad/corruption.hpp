#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gcad/core.hpp"
#include "gcad/dataset_io.hpp"
#include "gcad/graph.hpp"
#include "gcad/kmeans.hpp"
#include "gcad/rng.hpp"
#include "gcad/split.hpp"

namespace gcad {

struct CorruptionConfig {
    double corrupt_ratio = 0.15;  // injected / original node count
    std::optional<std::size_t> max_nodes_per_graph;
    std::uint64_t seed = 0;
    // Single-graph partitioning: K swept over [k_min, k_max] with the elbow
    // rule unless k_override pins it.
    std::size_t k_min = 2, k_max = 10;
    std::optional<std::size_t> k_override;
    SplitFractions split;

    void validate() const {
        if (!(corrupt_ratio > 0.0 && corrupt_ratio < 1.0))
            throw Error("CorruptionConfig: corrupt_ratio must be in (0,1)");
        if (k_min < 1 || k_max < k_min) throw Error("CorruptionConfig: bad K range");
    }
};

struct CorruptProvenance {
    std::size_t injected_node;  // node id within the corrupt graph
    std::string source_graph;
    std::size_t source_node;    // node id within the source graph
};

/// One part of the donor pool: the union-graph indices of its nodes plus
/// naming/provenance info.
struct DonorPart {
    std::string id;
    std::vector<std::size_t> union_ids;
};

struct UnionGraph {
    Tensor features;
    Tensor adjacency;
    // Provenance of every union node.
    std::vector<std::string> source_graph;
    std::vector<std::size_t> source_node;
};

/// k-means partition of a single graph's nodes in feature space, with
/// clusters smaller than 3 merged into the nearest-centroid cluster. Labels
/// are ignored (pre-training is label-free).
inline std::vector<std::vector<std::size_t>> partition_single_graph(const Graph& g,
                                                                    std::size_t k) {
    ClusteringResult res = kmeans(g.features, k, 0x5eed);
    std::vector<std::vector<std::size_t>> parts(k);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) parts[res.assignment[v]].push_back(v);

    // Merge undersized clusters into the nearest other centroid.
    for (std::size_t c = 0; c < k; ++c) {
        if (parts[c].empty() || parts[c].size() >= 3) continue;
        std::size_t target = c;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c || parts[o].size() < 3) continue;
            double d = 0.0;
            for (std::size_t f = 0; f < g.feature_dim(); ++f) {
                double diff = res.centroids(c, f) - res.centroids(o, f);
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                target = o;
            }
        }
        if (target != c) {
            for (std::size_t v : parts[c]) parts[target].push_back(v);
            parts[c].clear();
        }
    }
    std::vector<std::vector<std::size_t>> out;
    for (auto& p : parts)
        if (!p.empty()) out.push_back(std::move(p));
    return out;
}

namespace detail {

inline UnionGraph build_union(const Dataset& ds, std::vector<DonorPart>& parts) {
    UnionGraph u;
    if (ds.mode == Dataset::Mode::multi) {
        // Stack the graphs; the union adjacency is block diagonal, so
        // injected nodes keep only the links they had inside their donor
        // graph.
        std::size_t total = 0;
        for (const Graph& g : ds.graphs) total += g.num_nodes();
        u.features = Tensor(total, ds.feature_dim());
        u.adjacency = Tensor(total, total);
        u.source_graph.resize(total);
        u.source_node.resize(total);
        std::size_t off = 0;
        for (const Graph& g : ds.graphs) {
            DonorPart part;
            part.id = g.id;
            for (std::size_t v = 0; v < g.num_nodes(); ++v) {
                std::size_t uidx = off + v;
                part.union_ids.push_back(uidx);
                u.source_graph[uidx] = g.id;
                u.source_node[uidx] = v;
                for (std::size_t f = 0; f < g.feature_dim(); ++f)
                    u.features(uidx, f) = g.features(v, f);
                for (std::size_t w = 0; w < g.num_nodes(); ++w)
                    u.adjacency(uidx, off + w) = g.adjacency(v, w);
            }
            parts.push_back(std::move(part));
            off += g.num_nodes();
        }
    } else {
        const Graph& g = ds.graphs[0];
        u.features = g.features;
        u.adjacency = g.adjacency;
        u.source_graph.assign(g.num_nodes(), g.id);
        u.source_node.resize(g.num_nodes());
        for (std::size_t v = 0; v < g.num_nodes(); ++v) u.source_node[v] = v;
    }
    return u;
}

}  // namespace detail

struct CorruptDatasetResult {
    Dataset dataset;  // multi-graph; labels are pseudo-labels
    std::vector<std::vector<CorruptProvenance>> provenance;  // per corrupt graph
    bool donor_pool_exhausted = false;
    std::size_t chosen_k = 0;  // single-graph mode only
    std::vector<double> inertia_curve;
};

/// Builds one corrupt graph per part: injected nodes are sampled uniformly
/// without replacement from all other parts, and the corrupt adjacency is the
/// union adjacency sliced over the selected node set, so original intra-part
/// links survive verbatim.
inline CorruptDatasetResult corrupt_dataset(const Dataset& source, const CorruptionConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    // Determine the parts.
    Dataset working = source;
    std::vector<DonorPart> parts;
    CorruptDatasetResult out;
    UnionGraph u;
    if (source.mode == Dataset::Mode::multi) {
        u = detail::build_union(source, parts);
    } else {
        const Graph& g = source.graphs[0];
        std::size_t k;
        if (cfg.k_override) {
            k = *cfg.k_override;
        } else {
            std::size_t k_max = std::min(cfg.k_max, g.num_nodes());
            auto sweep = sweep_inertia(g.features, cfg.k_min, k_max, cfg.seed);
            out.inertia_curve = sweep[0].inertia_curve;
            k = elbow_select(out.inertia_curve, cfg.k_min);
        }
        out.chosen_k = k;
        auto node_parts = partition_single_graph(g, k);
        if (node_parts.size() < 2)
            throw Error("corrupt_dataset: partition produced fewer than 2 parts");
        u = detail::build_union(source, parts);  // parts empty for single; fill below
        parts.clear();
        for (std::size_t c = 0; c < node_parts.size(); ++c) {
            DonorPart p;
            p.id = detail::concat("part", c);
            p.union_ids = node_parts[c];
            parts.push_back(std::move(p));
        }
    }
    if (parts.size() < 2) throw Error("corrupt_dataset: need at least 2 parts");

    out.dataset.mode = Dataset::Mode::multi;

    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        std::vector<std::size_t> own = parts[pi].union_ids;
        if (cfg.max_nodes_per_graph && own.size() > *cfg.max_nodes_per_graph) {
            auto keep = rng.sample_without_replacement(own.size(), *cfg.max_nodes_per_graph);
            std::sort(keep.begin(), keep.end());
            std::vector<std::size_t> capped;
            for (std::size_t k : keep) capped.push_back(own[k]);
            own = std::move(capped);
        }

        std::size_t want = std::size_t(std::lround(cfg.corrupt_ratio * double(own.size())));
        if (want == 0) want = 1;

        std::vector<std::size_t> pool;
        for (std::size_t pj = 0; pj < parts.size(); ++pj)
            if (pj != pi)
                for (std::size_t v : parts[pj].union_ids) pool.push_back(v);
        if (want > pool.size()) {
            want = pool.size();
            out.donor_pool_exhausted = true;
        }
        std::vector<std::size_t> picked_idx = rng.sample_without_replacement(pool.size(), want);
        std::sort(picked_idx.begin(), picked_idx.end());

        // Node set: originals first, then injected donors.
        std::vector<std::size_t> members = own;
        for (std::size_t k : picked_idx) members.push_back(pool[k]);

        Graph cg;
        cg.id = parts[pi].id;
        std::size_t n = members.size();
        cg.features = Tensor(n, u.features.cols());
        cg.adjacency = Tensor(n, n);
        cg.labels.assign(n, kLabelNormal);
        std::vector<CorruptProvenance> prov;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t f = 0; f < u.features.cols(); ++f)
                cg.features(a, f) = u.features(members[a], f);
            for (std::size_t b = 0; b < n; ++b)
                cg.adjacency(a, b) = u.adjacency(members[a], members[b]);
            if (a >= own.size()) {
                cg.labels[a] = kLabelAbnormal;
                prov.push_back({a, u.source_graph[members[a]], u.source_node[members[a]]});
            }
        }
        cg.validate();
        out.dataset.graphs.push_back(std::move(cg));
        out.provenance.push_back(std::move(prov));
    }

    if (out.dataset.graphs.size() >= 3)
        out.dataset = make_split(std::move(out.dataset), cfg.split, rng.split(0xfeed).next_u64());
    out.dataset.validate();
    return out;
}

inline void write_provenance_csv(const std::vector<CorruptProvenance>& prov,
                                 const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error(detail::concat("cannot write ", path.string()));
    os << "injected_node_id,source_graph,source_node\n";
    for (const CorruptProvenance& p : prov)
        os << p.injected_node << "," << p.source_graph << "," << p.source_node << "\n";
}

/// Writes the corrupt dataset in the standard directory format plus
/// per-graph provenance.csv files.
inline void save_corrupt_dataset(const CorruptDatasetResult& res,
                                 const std::filesystem::path& dir) {
    save_dataset(res.dataset, dir);
    for (std::size_t i = 0; i < res.dataset.graphs.size(); ++i)
        write_provenance_csv(res.provenance[i], dir / res.dataset.graphs[i].id / "provenance.csv");
}

}  // namespace gcad
