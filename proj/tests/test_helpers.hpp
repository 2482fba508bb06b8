#pragma once

#include <filesystem>
#include <string>

#include "gcad/graph.hpp"
#include "gcad/rng.hpp"

namespace gcad::testing {

inline Graph random_graph(Rng& rng, std::size_t n, std::size_t d, double p_edge,
                          double label_fraction = 1.0) {
    Graph g;
    g.id = "g" + std::to_string(rng.uniform_index(1000000));
    g.features = Tensor(n, d);
    for (std::size_t i = 0; i < g.features.size(); ++i) g.features[i] = rng.uniform(-2.0, 2.0);
    g.adjacency = Tensor(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p_edge) {
                double w = rng.uniform(0.1, 1.0);
                g.adjacency(i, j) = w;
                g.adjacency(j, i) = w;
            }
    g.labels.assign(n, kLabelUnknown);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform() < label_fraction) g.labels[i] = rng.uniform() < 0.25 ? 1 : 0;
    return g;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(i));
            if (!std::filesystem::exists(path_)) break;
        }
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace gcad::testing
