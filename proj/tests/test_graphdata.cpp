#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "gcad/dataset_io.hpp"
#include "gcad/split.hpp"
#include "test_helpers.hpp"

using namespace gcad;
using gcad::testing::random_graph;
using gcad::testing::TempDir;

namespace {

Dataset two_graph_fixture(std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.mode = Dataset::Mode::multi;
    for (int k = 0; k < 2; ++k) {
        Graph g = random_graph(rng, 6 + k, 3, 0.4);
        g.id = "g" + std::to_string(k);
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

}  // namespace

TEST_CASE("well-formed two-graph fixture round-trips exactly", "[graphdata]") {
    Dataset ds = two_graph_fixture(42);
    ds.graphs[0].adjacency(1, 2) = ds.graphs[0].adjacency(2, 1) = 0.12345678901234567;

    TempDir dir("gcad-roundtrip");
    save_dataset(ds, dir.path());
    Dataset back = load_dataset(dir.path());

    REQUIRE(back.graphs.size() == 2);
    CHECK(back.mode == Dataset::Mode::multi);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(back.graphs[k].id == ds.graphs[k].id);
        CHECK(back.graphs[k].features == ds.graphs[k].features);   // bit-for-bit
        CHECK(back.graphs[k].adjacency == ds.graphs[k].adjacency);
        CHECK(back.graphs[k].labels == ds.graphs[k].labels);
    }
}

TEST_CASE("split round-trips through splits.json", "[graphdata]") {
    Dataset ds = two_graph_fixture(43);
    Graph extra = ds.graphs[0];
    extra.id = "g2";
    ds.graphs.push_back(extra);
    ds = make_split(std::move(ds), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 7);

    TempDir dir("gcad-split");
    save_dataset(ds, dir.path());
    Dataset back = load_dataset(dir.path());
    CHECK(back.split.train_graphs == ds.split.train_graphs);
    CHECK(back.split.valid_graphs == ds.split.valid_graphs);
    CHECK(back.split.test_graphs == ds.split.test_graphs);
}

TEST_CASE("edge referencing an out-of-range node names the row", "[graphdata]") {
    Dataset ds = two_graph_fixture(44);
    TempDir dir("gcad-badedge");
    save_dataset(ds, dir.path());
    {
        std::ofstream os(dir.path() / "g0" / "edges.csv", std::ios::app);
        os << "0,99,1.0\n";
    }
    try {
        load_dataset(dir.path());
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("edges.csv") != std::string::npos);
        CHECK(msg.find("out of range") != std::string::npos);
    }
}

TEST_CASE("malformed inputs produce structured errors", "[graphdata]") {
    Dataset ds = two_graph_fixture(45);
    SECTION("missing file") {
        TempDir dir("gcad-missing");
        save_dataset(ds, dir.path());
        std::filesystem::remove(dir.path() / "g1" / "features.f64");
        CHECK_THROWS_AS(load_dataset(dir.path()), ParseError);
    }
    SECTION("label outside domain") {
        TempDir dir("gcad-badlabel");
        save_dataset(ds, dir.path());
        std::ofstream os(dir.path() / "g0" / "nodes.csv");
        os << "node_id,label\n0,2\n";
        os.close();
        CHECK_THROWS_AS(load_dataset(dir.path()), ParseError);
    }
    SECTION("non-positive weight") {
        TempDir dir("gcad-badweight");
        save_dataset(ds, dir.path());
        std::ofstream os(dir.path() / "g0" / "edges.csv", std::ios::app);
        os << "0,1,0\n";
        os.close();
        CHECK_THROWS_AS(load_dataset(dir.path()), ParseError);
    }
    SECTION("self loop") {
        TempDir dir("gcad-selfloop");
        save_dataset(ds, dir.path());
        std::ofstream os(dir.path() / "g0" / "edges.csv", std::ios::app);
        os << "3,3,1.0\n";
        os.close();
        CHECK_THROWS_AS(load_dataset(dir.path()), ParseError);
    }
    SECTION("feature dim mismatch vs manifest") {
        TempDir dir("gcad-raggeddim");
        save_dataset(ds, dir.path());
        write_features_f64(dir.path() / "g0" / "features.f64", Tensor(6, 5));
        CHECK_THROWS_AS(load_dataset(dir.path()), ParseError);
    }
    SECTION("feature row count mismatch") {
        TempDir dir("gcad-raggedrows");
        save_dataset(ds, dir.path());
        write_features_f64(dir.path() / "g0" / "features.f64", Tensor(3, 3));
        CHECK_THROWS_AS(load_dataset(dir.path()), ParseError);
    }
}

TEST_CASE("graph validation catches direct corruption", "[graphdata]") {
    Rng rng(50);
    Graph g = random_graph(rng, 5, 2, 0.5);
    SECTION("asymmetry") {
        g.adjacency(1, 2) = 0.5;
        g.adjacency(2, 1) = 0.25;
        CHECK_THROWS_AS(g.validate(), ParseError);
    }
    SECTION("diagonal") {
        g.adjacency(3, 3) = 1.0;
        CHECK_THROWS_AS(g.validate(), ParseError);
    }
    SECTION("bad label") {
        g.labels[0] = 7;
        CHECK_THROWS_AS(g.validate(), ParseError);
    }
}

TEST_CASE("make_split floor rule gives {7,1,2} for 10 graphs", "[graphdata]") {
    Rng rng(60);
    Dataset ds;
    ds.mode = Dataset::Mode::multi;
    for (int k = 0; k < 10; ++k) {
        Graph g = random_graph(rng, 5, 2, 0.3);
        g.id = "g" + std::to_string(k);
        ds.graphs.push_back(std::move(g));
    }
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        Dataset s = make_split(ds, {0.7, 0.1, 0.2}, seed);
        CHECK(s.split.train_graphs.size() == 7);
        CHECK(s.split.valid_graphs.size() == 1);
        CHECK(s.split.test_graphs.size() == 2);
    }
}

TEST_CASE("make_split is deterministic and exhaustive", "[graphdata]") {
    Rng rng(61);
    Dataset ds;
    ds.mode = Dataset::Mode::single;
    Graph g = random_graph(rng, 40, 3, 0.2, 0.8);  // some unlabeled nodes
    g.id = "big";
    ds.graphs.push_back(std::move(g));

    Dataset a = make_split(ds, {0.7, 0.1, 0.2}, 5);
    Dataset b = make_split(ds, {0.7, 0.1, 0.2}, 5);
    CHECK(a.split.train_nodes == b.split.train_nodes);
    CHECK(a.split.valid_nodes == b.split.valid_nodes);
    CHECK(a.split.test_nodes == b.split.test_nodes);

    // Exhaustive and disjoint over labeled nodes (validate_split also enforces).
    std::vector<bool> seen(ds.graphs[0].num_nodes(), false);
    std::size_t total = 0;
    for (const auto* part : {&a.split.train_nodes, &a.split.valid_nodes, &a.split.test_nodes})
        for (std::size_t v : *part) {
            CHECK(!seen[v]);
            CHECK(ds.graphs[0].labels[v] != kLabelUnknown);
            seen[v] = true;
            ++total;
        }
    std::size_t labeled = ds.graphs[0].count_label(0) + ds.graphs[0].count_label(1);
    CHECK(total == labeled);
}

TEST_CASE("make_split rejects bad inputs", "[graphdata]") {
    Dataset ds = two_graph_fixture(62);
    CHECK_THROWS_AS(make_split(ds, {0.7, 0.1, 0.2}, 1), Error);  // only 2 graphs
    Graph extra = ds.graphs[0];
    extra.id = "g2";
    ds.graphs.push_back(extra);
    CHECK_THROWS_AS(make_split(ds, {0.9, 0.2, 0.2}, 1), Error);  // doesn't sum to 1
}
