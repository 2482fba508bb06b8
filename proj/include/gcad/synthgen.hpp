#pragma once

#include <cmath>
#include <vector>

#include "gcad/core.hpp"
#include "gcad/graph.hpp"
#include "gcad/rng.hpp"
#include "gcad/similarity.hpp"
#include "gcad/split.hpp"

namespace gcad {

/// Planted-anomaly benchmark generator.
///
/// A global pool of "topic" centres is shared by every graph; each graph
/// draws a few native topics for its normal clusters, and its anomalies
/// arrive in small clumps drawn from foreign topics (ones the graph does not
/// own). The same feature vector is therefore normal in one graph and
/// anomalous in another, so only a node's relation to its graph's context
/// carries the label. Clumps keep intra-clump edges, and suspicious
/// normal-abnormal links are planted with p_suspicious.
struct SynthConfig {
    Dataset::Mode mode = Dataset::Mode::multi;
    std::size_t num_graphs = 50;  // multi mode
    std::size_t nodes_min = 80, nodes_max = 120;
    std::size_t feature_dim = 16;
    std::size_t clusters_per_graph = 4;  // native topics per graph
    std::size_t topic_pool = 12;         // global topic count
    std::size_t anomaly_clump = 12;      // anomalies per foreign clump (capped at the count)
    double anomaly_fraction = 0.1;
    double p_intra = 0.15;        // edge probability within a cluster or clump
    double p_cross = 0.02;        // normal-normal edges across clusters
    double p_suspicious = 0.021;  // anomaly-to-camouflage-cluster pair probability
    double camouflage = 0.35;     // anomaly features drift this far toward the target cluster
    double noise_scale = 1.0;
    double cluster_spread = 2.0;
    SplitFractions split;
    std::uint64_t seed = 1;

    void validate() const {
        if (mode == Dataset::Mode::multi && num_graphs < 3)
            throw Error("SynthConfig: multi mode needs at least 3 graphs");
        if (nodes_min < 4 || nodes_max < nodes_min)
            throw Error("SynthConfig: bad node range");
        if (feature_dim < 1 || clusters_per_graph < 1 || anomaly_clump < 1)
            throw Error("SynthConfig: dims and cluster sizes must be positive");
        if (topic_pool <= clusters_per_graph)
            throw Error("SynthConfig: topic_pool must exceed clusters_per_graph");
        if (!(anomaly_fraction > 0.0 && anomaly_fraction < 0.5))
            throw Error("SynthConfig: anomaly_fraction must be in (0, 0.5)");
        for (double p : {p_intra, p_cross, p_suspicious, camouflage})
            if (p < 0.0 || p > 1.0) throw Error("SynthConfig: probabilities must be in [0,1]");
        if (std::size_t(std::lround(anomaly_fraction * double(nodes_min))) == 0)
            throw Error("SynthConfig: anomaly count rounds to zero at nodes_min");
    }
};

namespace detail {

inline Tensor draw_centers(Rng& rng, std::size_t k, std::size_t d, double spread) {
    Tensor c(k, d);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = spread * rng.normal();
    return c;
}

// One graph: normal clusters over `native` topic centres, anomalies in
// clumps over `foreign` topic centres. Within-cluster and within-clump pairs
// link with p_intra; normal-abnormal pairs with p_suspicious.
inline Graph build_graph(const std::string& id, Rng& rng, const SynthConfig& cfg,
                         const Tensor& pool, const std::vector<std::size_t>& native,
                         const std::vector<std::size_t>& foreign, std::size_t n_total) {
    std::size_t n = n_total;
    std::size_t n_ab = std::size_t(std::lround(cfg.anomaly_fraction * double(n)));
    if (n_ab == 0) throw Error("synthgen: anomaly count rounded to zero");
    std::size_t n_norm = n - n_ab;
    std::size_t d = cfg.feature_dim;

    // Random node order so labels are not id-correlated.
    std::vector<std::size_t> slot(n);
    for (std::size_t i = 0; i < n; ++i) slot[i] = i;
    rng.shuffle(slot);

    Graph g;
    g.id = id;
    g.features = Tensor(n, d);
    g.adjacency = Tensor(n, n);
    g.labels.assign(n, kLabelNormal);

    // Anomaly clumps, each tied to one foreign topic and camouflaged into one
    // native cluster: suspicious links attach clump members to that cluster's
    // normals specifically (coincidental-coauthor style), not to random
    // normals, so heavy suspicious linking blends anomalies into a legitimate
    // neighborhood instead of flagging them by neighborhood diversity.
    std::size_t clump_size = std::min<std::size_t>(cfg.anomaly_clump, n_ab);
    std::size_t n_clumps = (n_ab + clump_size - 1) / clump_size;
    std::vector<std::size_t> clump_topic(n_clumps), clump_target(n_clumps);
    for (std::size_t c = 0; c < n_clumps; ++c) {
        clump_topic[c] = foreign[rng.uniform_index(foreign.size())];
        clump_target[c] = rng.uniform_index(native.size());
    }

    std::vector<std::size_t> group_of(n, 0);  // natives: 0..k-1; clumps: k+ci
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t node = slot[j];
        if (j < n_norm) {
            std::size_t c = j % native.size();
            group_of[node] = c;
            for (std::size_t f = 0; f < d; ++f)
                g.features(node, f) = pool(native[c], f) + cfg.noise_scale * rng.normal();
        } else {
            std::size_t clump = (j - n_norm) / clump_size;
            g.labels[node] = kLabelAbnormal;
            group_of[node] = native.size() + clump;
            // Disguised features: partway between the foreign topic and the
            // camouflage cluster's topic.
            std::size_t ft = clump_topic[clump];
            std::size_t ct = native[clump_target[clump]];
            for (std::size_t f = 0; f < d; ++f)
                g.features(node, f) = (1.0 - cfg.camouflage) * pool(ft, f) +
                                      cfg.camouflage * pool(ct, f) +
                                      cfg.noise_scale * rng.normal();
        }
    }

    // Density-match the clumps so node degree carries no label signal: a
    // clump member should expect as many intra edges as a normal cluster
    // member gets.
    double normal_cluster = double(n_norm) / double(native.size());
    double p_clump = clump_size > 1
                         ? std::min(1.0, cfg.p_intra * (normal_cluster - 1.0) /
                                             (double(clump_size) - 1.0))
                         : 0.0;

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            bool edge = false;
            if (g.labels[i] == g.labels[j]) {
                if (group_of[i] == group_of[j])
                    edge = rng.uniform() < (g.labels[i] == kLabelAbnormal ? p_clump : cfg.p_intra);
                else if (g.labels[i] == kLabelNormal)
                    // Cross-cluster normal links (shared-coauthor style).
                    edge = rng.uniform() < cfg.p_cross;
            } else {
                std::size_t ab = g.labels[i] == kLabelAbnormal ? i : j;
                std::size_t nm = g.labels[i] == kLabelAbnormal ? j : i;
                std::size_t clump = group_of[ab] - native.size();
                edge = group_of[nm] == clump_target[clump] && rng.uniform() < cfg.p_suspicious;
            }
            if (edge) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
        }
    return g;
}

}  // namespace detail

/// Deterministic by seed. Verifies at generation time that raw features
/// separate: pooled mean(N-GL) must exceed mean(AB-GL).
inline Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Dataset ds;
    ds.mode = cfg.mode;

    Tensor pool = detail::draw_centers(rng, cfg.topic_pool, cfg.feature_dim, cfg.cluster_spread);
    std::size_t n_graphs = cfg.mode == Dataset::Mode::multi ? cfg.num_graphs : 1;

    for (std::size_t gi = 0; gi < n_graphs; ++gi) {
        std::vector<std::size_t> topics =
            rng.sample_without_replacement(cfg.topic_pool, cfg.clusters_per_graph);
        std::vector<bool> is_native(cfg.topic_pool, false);
        for (std::size_t t : topics) is_native[t] = true;
        std::vector<std::size_t> foreign;
        for (std::size_t t = 0; t < cfg.topic_pool; ++t)
            if (!is_native[t]) foreign.push_back(t);

        std::size_t n = cfg.nodes_min + rng.uniform_index(cfg.nodes_max - cfg.nodes_min + 1);
        ds.graphs.push_back(detail::build_graph(detail::concat("g", gi), rng, cfg, pool, topics,
                                                foreign, n));
    }

    // Generation-time separation check on raw features.
    double ngl_sum = 0.0, abgl_sum = 0.0;
    std::size_t ngl_n = 0, abgl_n = 0;
    for (const Graph& g : ds.graphs) {
        SimilarityAnalysis a = similarity_analysis(g.features, g.labels);
        const auto& ngl = a.group("N-GL");
        const auto& abgl = a.group("AB-GL");
        ngl_sum += ngl.mean * double(ngl.samples);
        ngl_n += ngl.samples;
        abgl_sum += abgl.mean * double(abgl.samples);
        abgl_n += abgl.samples;
    }
    if (ngl_n == 0 || abgl_n == 0 || ngl_sum / double(ngl_n) <= abgl_sum / double(abgl_n))
        throw Error("synthgen: raw-feature similarity means do not separate; "
                    "increase cluster_spread or lower noise_scale");

    ds = make_split(std::move(ds), cfg.split, rng.split(0xbeef).next_u64());
    ds.validate();
    return ds;
}

/// Benchmark presets: "easy" keeps suspicious links rare (~3% of edges),
/// "hard" floods them (~20%).
inline SynthConfig synth_preset(const std::string& name) {
    SynthConfig cfg;
    if (name == "easy" || name == "default") {
        cfg.p_suspicious = 0.021;
    } else if (name == "hard") {
        cfg.p_suspicious = 0.195;
    } else if (name == "single") {
        cfg.mode = Dataset::Mode::single;
        cfg.nodes_min = 300;
        cfg.nodes_max = 300;
        cfg.clusters_per_graph = 4;
        cfg.p_suspicious = 0.01;
    } else {
        throw Error(detail::concat("unknown synth preset '", name,
                                   "' (easy, default, hard, single)"));
    }
    return cfg;
}

}  // namespace gcad
