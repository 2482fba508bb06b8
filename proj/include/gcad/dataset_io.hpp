#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcad/core.hpp"
#include "gcad/graph.hpp"

namespace gcad {

namespace detail {

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64_le(std::istream& is, const std::string& what) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ParseError(concat(what, ": truncated"));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline void write_f64_le(std::ostream& os, double d) {
    write_u64_le(os, std::bit_cast<std::uint64_t>(d));
}

inline double read_f64_le(std::istream& is, const std::string& what) {
    return std::bit_cast<double>(read_u64_le(is, what));
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline long parse_long(const std::string& s, const std::string& file, std::size_t line) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(concat(file, ":", line, ": expected integer, got '", s, "'"));
    }
}

inline double parse_double(const std::string& s, const std::string& file, std::size_t line) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(concat(file, ":", line, ": expected number, got '", s, "'"));
    }
}

}  // namespace detail

/// Reads features.f64: two little-endian u64 counts (N, d) then N*d
/// little-endian doubles, row-major.
inline Tensor read_features_f64(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError(detail::concat("missing file: ", path.string()));
    std::uint64_t n = detail::read_u64_le(is, path.string());
    std::uint64_t d = detail::read_u64_le(is, path.string());
    Tensor t(n, d);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::read_f64_le(is, path.string());
    is.peek();
    if (!is.eof()) throw ParseError(detail::concat(path.string(), ": trailing bytes"));
    return t;
}

inline void write_features_f64(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(detail::concat("cannot write ", path.string()));
    detail::write_u64_le(os, t.rows());
    detail::write_u64_le(os, t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) detail::write_f64_le(os, t[i]);
}

namespace detail {

inline Graph load_graph_dir(const std::filesystem::path& dir, const std::string& id,
                            std::size_t expected_dim) {
    namespace fs = std::filesystem;
    Graph g;
    g.id = id;

    fs::path nodes_path = dir / "nodes.csv";
    std::ifstream nodes(nodes_path);
    if (!nodes) throw ParseError(concat("missing file: ", nodes_path.string()));
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(nodes, line) || split_csv_line(line) != std::vector<std::string>{"node_id", "label"})
        throw ParseError(concat(nodes_path.string(), ":1: expected header 'node_id,label'"));
    while (std::getline(nodes, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 2)
            throw ParseError(concat(nodes_path.string(), ":", lineno, ": expected 2 fields"));
        long nid = parse_long(f[0], nodes_path.string(), lineno);
        long lab = parse_long(f[1], nodes_path.string(), lineno);
        if (nid != long(g.labels.size()))
            throw ParseError(concat(nodes_path.string(), ":", lineno, ": node_id ", nid,
                                    " not dense (expected ", g.labels.size(), ")"));
        if (lab != -1 && lab != 0 && lab != 1)
            throw ParseError(concat(nodes_path.string(), ":", lineno, ": label ", lab,
                                    " outside {0,1,-1}"));
        g.labels.push_back(int(lab));
    }
    std::size_t n = g.labels.size();

    g.features = read_features_f64(dir / "features.f64");
    if (g.features.rows() != n)
        throw ParseError(concat((dir / "features.f64").string(), ": ", g.features.rows(),
                                " feature rows for ", n, " nodes"));
    if (g.features.cols() != expected_dim)
        throw ParseError(concat((dir / "features.f64").string(), ": feature dim ",
                                g.features.cols(), " != manifest feature_dim ", expected_dim));

    fs::path edges_path = dir / "edges.csv";
    std::ifstream edges(edges_path);
    if (!edges) throw ParseError(concat("missing file: ", edges_path.string()));
    lineno = 1;
    if (!std::getline(edges, line) ||
        split_csv_line(line) != std::vector<std::string>{"src", "dst", "weight"})
        throw ParseError(concat(edges_path.string(), ":1: expected header 'src,dst,weight'"));
    g.adjacency = Tensor(n, n);
    while (std::getline(edges, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 3)
            throw ParseError(concat(edges_path.string(), ":", lineno, ": expected 3 fields"));
        long src = parse_long(f[0], edges_path.string(), lineno);
        long dst = parse_long(f[1], edges_path.string(), lineno);
        double w = parse_double(f[2], edges_path.string(), lineno);
        if (src < 0 || dst < 0 || src >= long(n) || dst >= long(n))
            throw ParseError(concat(edges_path.string(), ":", lineno, ": node id out of range [0,",
                                    n, ")"));
        if (src == dst)
            throw ParseError(concat(edges_path.string(), ":", lineno, ": self loop on node ", src));
        if (!(w > 0.0))
            throw ParseError(concat(edges_path.string(), ":", lineno, ": weight must be > 0"));
        if (g.adjacency(src, dst) != 0.0)
            throw ParseError(concat(edges_path.string(), ":", lineno, ": duplicate edge ", src,
                                    "-", dst));
        g.adjacency(src, dst) = w;
        g.adjacency(dst, src) = w;
    }
    g.validate();
    return g;
}

}  // namespace detail

/// Loads and fully validates a dataset directory (see README for the layout).
inline Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw ParseError(detail::concat("dataset directory not found: ", dir.string()));
    fs::path manifest_path = dir / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw ParseError(detail::concat("missing file: ", manifest_path.string()));
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(detail::concat(manifest_path.string(), ": ", e.what()));
    }

    Dataset ds;
    std::string mode = manifest.value("mode", "");
    if (mode == "multi")
        ds.mode = Dataset::Mode::multi;
    else if (mode == "single")
        ds.mode = Dataset::Mode::single;
    else
        throw ParseError(detail::concat(manifest_path.string(),
                                        ": mode must be 'multi' or 'single', got '", mode, "'"));
    if (!manifest.contains("graphs") || !manifest["graphs"].is_array())
        throw ParseError(detail::concat(manifest_path.string(), ": missing 'graphs' array"));
    if (!manifest.contains("feature_dim") || !manifest["feature_dim"].is_number_unsigned())
        throw ParseError(detail::concat(manifest_path.string(), ": missing 'feature_dim'"));
    std::size_t d = manifest["feature_dim"].get<std::size_t>();

    for (const auto& idj : manifest["graphs"]) {
        std::string id = idj.get<std::string>();
        ds.graphs.push_back(detail::load_graph_dir(dir / id, id, d));
    }

    fs::path splits_path = dir / "splits.json";
    if (fs::exists(splits_path)) {
        std::ifstream sf(splits_path);
        nlohmann::json sj;
        try {
            sf >> sj;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(detail::concat(splits_path.string(), ": ", e.what()));
        }
        auto read_part = [&](const char* key, std::vector<std::string>& gs,
                             std::vector<std::size_t>& ns) {
            if (!sj.contains(key)) throw ParseError(detail::concat(splits_path.string(),
                                                                   ": missing '", key, "'"));
            for (const auto& v : sj[key]) {
                if (ds.mode == Dataset::Mode::multi)
                    gs.push_back(v.get<std::string>());
                else
                    ns.push_back(v.get<std::size_t>());
            }
        };
        read_part("train", ds.split.train_graphs, ds.split.train_nodes);
        read_part("valid", ds.split.valid_graphs, ds.split.valid_nodes);
        read_part("test", ds.split.test_graphs, ds.split.test_nodes);
    }

    ds.validate();
    return ds;
}

/// Writes a dataset in the directory format; exact inverse of load_dataset.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["mode"] = ds.mode == Dataset::Mode::multi ? "multi" : "single";
    manifest["feature_dim"] = ds.feature_dim();
    manifest["graphs"] = nlohmann::json::array();
    for (const Graph& g : ds.graphs) manifest["graphs"].push_back(g.id);
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";

    for (const Graph& g : ds.graphs) {
        fs::path gdir = dir / g.id;
        fs::create_directories(gdir);
        {
            std::ofstream os(gdir / "nodes.csv");
            os << "node_id,label\n";
            for (std::size_t i = 0; i < g.num_nodes(); ++i)
                os << i << "," << g.labels[i] << "\n";
        }
        {
            std::ofstream os(gdir / "edges.csv");
            os << "src,dst,weight\n";
            for (const EdgeRef& e : g.edges())
                os << e.src << "," << e.dst << "," << detail::format_double(e.weight) << "\n";
        }
        write_features_f64(gdir / "features.f64", g.features);
    }

    if (!ds.split.empty()) {
        nlohmann::json sj;
        auto put = [&](const char* key, const std::vector<std::string>& gs,
                       const std::vector<std::size_t>& ns) {
            sj[key] = nlohmann::json::array();
            if (ds.mode == Dataset::Mode::multi)
                for (const auto& s : gs) sj[key].push_back(s);
            else
                for (auto v : ns) sj[key].push_back(v);
        };
        put("train", ds.split.train_graphs, ds.split.train_nodes);
        put("valid", ds.split.valid_graphs, ds.split.valid_nodes);
        put("test", ds.split.test_graphs, ds.split.test_nodes);
        std::ofstream(dir / "splits.json") << sj.dump(2) << "\n";
    }
}

}  // namespace gcad
