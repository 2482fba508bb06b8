#pragma once

#include <cmath>
#include <vector>

#include "gcad/core.hpp"
#include "gcad/graph.hpp"
#include "gcad/rng.hpp"

namespace gcad {

struct SplitFractions {
    double train = 0.7, valid = 0.1, test = 0.2;
};

/// Deterministic split: whole graphs in multi-graph mode, labeled nodes in
/// single-graph mode. Sizes are floor(fraction * n) with the remainder
/// assigned to train.
inline Dataset make_split(Dataset ds, SplitFractions f, std::uint64_t seed) {
    if (!(f.train > 0.0 && f.valid > 0.0 && f.test > 0.0))
        throw Error("make_split: fractions must be positive");
    if (std::fabs(f.train + f.valid + f.test - 1.0) > 1e-9)
        throw Error("make_split: fractions must sum to 1");

    Rng rng(seed);
    ds.split = Split{};

    if (ds.mode == Dataset::Mode::multi) {
        std::size_t n = ds.graphs.size();
        if (n < 3) throw Error(detail::concat("make_split: need at least 3 graphs, got ", n));
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t n_valid = std::size_t(std::floor(f.valid * double(n)));
        std::size_t n_test = std::size_t(std::floor(f.test * double(n)));
        std::size_t n_train = n - n_valid - n_test;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& id = ds.graphs[order[i]].id;
            if (i < n_train)
                ds.split.train_graphs.push_back(id);
            else if (i < n_train + n_valid)
                ds.split.valid_graphs.push_back(id);
            else
                ds.split.test_graphs.push_back(id);
        }
    } else {
        const Graph& g = ds.graphs[0];
        std::vector<std::size_t> labeled;
        for (std::size_t v = 0; v < g.num_nodes(); ++v)
            if (g.labels[v] != kLabelUnknown) labeled.push_back(v);
        std::size_t n = labeled.size();
        if (n < 3) throw Error(detail::concat("make_split: need at least 3 labeled nodes, got ", n));
        rng.shuffle(labeled);
        std::size_t n_valid = std::size_t(std::floor(f.valid * double(n)));
        std::size_t n_test = std::size_t(std::floor(f.test * double(n)));
        std::size_t n_train = n - n_valid - n_test;
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train)
                ds.split.train_nodes.push_back(labeled[i]);
            else if (i < n_train + n_valid)
                ds.split.valid_nodes.push_back(labeled[i]);
            else
                ds.split.test_nodes.push_back(labeled[i]);
        }
    }
    ds.validate_split();
    return ds;
}

}  // namespace gcad
