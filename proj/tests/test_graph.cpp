#include "prereq/graph.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>

using namespace prereq;
using namespace testutil;

namespace {

ConceptGraph abc(std::vector<Edge> edges) { return ConceptGraph({"A", "B", "C"}, std::move(edges)); }

void write_pair_files(const fs::path& dir, const std::string& a1, const std::string& a2) {
    write_file(dir / "concepts.tsv", "index\tname\n0\tA\n1\tB\n2\tC\n");
    write_file(dir / "edges_annotator1.tsv", a1);
    write_file(dir / "edges_annotator2.tsv", a2);
}

/// Longest vertex count of a simple path in a DAG by exhaustive search.
std::size_t brute_longest_dag_path(const ConceptGraph& g) {
    std::function<std::size_t(int)> from = [&](int v) {
        std::size_t best = 1;
        for (int w : g.successors(v)) best = std::max(best, 1 + from(w));
        return best;
    };
    std::size_t best = g.size() ? 1 : 0;
    for (std::size_t v = 0; v < g.size(); ++v) best = std::max(best, from(static_cast<int>(v)));
    return best;
}

}  // namespace

TEST_CASE("ConceptGraph invariants") {
    CHECK_THROWS_AS(ConceptGraph({"A", "a"}, {}), Error);
    CHECK_THROWS_AS(abc({{0, 0}}), Error);
    CHECK_THROWS_AS(abc({{0, 3}}), Error);
    const ConceptGraph g = abc({{1, 2}, {0, 1}, {0, 1}});
    CHECK(g.edges() == std::vector<Edge>{{0, 1}, {1, 2}});
    CHECK(g.find("b").value() == 1);
    CHECK_FALSE(g.find("D").has_value());
    CHECK_THROWS_AS(g.index_of("D"), Error);
}

TEST_CASE("load_concept_graph merge modes") {
    TempDir dir("graph_merge");
    SUBCASE("union of {A->B} and {A->B, B->C} has 2 edges") {
        write_pair_files(dir.path, "A\tB\n", "A\tB\nB\tC\n");
        CHECK(load_graph_dir(dir.path, MergeMode::Union).edges().size() == 2);
        CHECK(load_graph_dir(dir.path, MergeMode::Intersection).edges().size() == 1);
        CHECK(load_graph_dir(dir.path, MergeMode::Single).edges().size() == 1);
    }
    SUBCASE("disjoint annotators intersect to nothing") {
        write_pair_files(dir.path, "A\tB\n", "B\tC\n");
        const ConceptGraph g = load_graph_dir(dir.path, MergeMode::Intersection);
        CHECK(g.size() == 3);
        CHECK(g.edges().empty());
    }
    SUBCASE("unknown concept reports file and line") {
        write_pair_files(dir.path, "# header comment\nA\tB\nA\tZed\n", "A\tB\n");
        try {
            load_graph_dir(dir.path);
            FAIL("expected an error");
        } catch (const Error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("edges_annotator1.tsv:3") != std::string::npos);
            CHECK(msg.find("Zed") != std::string::npos);
        }
    }
    SUBCASE("duplicate lines warn and deduplicate") {
        write_pair_files(dir.path, "A\tB\na\tb\n", "A\tB\n");
        std::vector<std::string> warnings;
        const ConceptGraph g = load_graph_dir(dir.path, MergeMode::Intersection, &warnings);
        CHECK(g.edges().size() == 1);
        CHECK(warnings.size() == 1);
    }
}

TEST_CASE("intersection is a subgraph of each annotator") {
    const fs::path dir = fs::path(FIXTURES_DIR) / "pos_tagging";
    const ConceptGraph inter = load_graph_dir(dir, MergeMode::Intersection);
    const ConceptGraph vertices(read_concepts_tsv(dir / "concepts.tsv"), {});
    for (const auto* f : {"edges_annotator1.tsv", "edges_annotator2.tsv"}) {
        const auto edges = read_edges_tsv(dir / f, vertices);
        for (const auto& e : inter.edges()) CHECK(std::find(edges.begin(), edges.end(), e) != edges.end());
    }
    CHECK(inter.edges().size() == 8);
    CHECK(load_graph_dir(dir, MergeMode::Union).edges().size() == 10);
}

TEST_CASE("graph_statistics: empty-edge graph") {
    const GraphStats s = graph_statistics(ConceptGraph(letter_names(4), {}));
    for (const auto& e : s.top_in) CHECK(e.degree == 0);
    for (const auto& e : s.top_out) CHECK(e.degree == 0);
    CHECK(s.isolated.size() == 4);
    CHECK(s.longest_path.size() == 1);
    CHECK(s.mutual_pairs.empty());
}

TEST_CASE("graph_statistics: degrees equal a brute-force recount") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ConceptGraph g = random_graph(25, 0.08, seed);
        const GraphStats s = graph_statistics(g, g.size());
        std::map<std::string, std::size_t> in, out;
        for (const auto& n : g.names()) in[n] = out[n] = 0;
        for (const auto& [u, v] : g.edges()) {
            ++out[g.name(u)];
            ++in[g.name(v)];
        }
        REQUIRE(s.top_in.size() == g.size());
        for (std::size_t i = 0; i < s.top_in.size(); ++i) {
            CHECK(s.top_in[i].degree == in[s.top_in[i].concept_name]);
            CHECK(s.top_out[i].degree == out[s.top_out[i].concept_name]);
            if (i > 0) {
                const auto& a = s.top_in[i - 1];
                const auto& b = s.top_in[i];
                CHECK((a.degree > b.degree || (a.degree == b.degree && a.concept_name < b.concept_name)));
            }
        }
        std::size_t mutual = 0, isolated = 0;
        for (const auto& [u, v] : g.edges()) mutual += (u < v && g.has_edge(v, u));
        for (const auto& n : g.names()) isolated += (in[n] + out[n] == 0);
        CHECK(s.mutual_pairs.size() == mutual);
        CHECK(s.isolated.size() == isolated);
        for (const auto& [a, b] : s.mutual_pairs) {
            CHECK(g.has_edge(g.index_of(a), g.index_of(b)));
            CHECK(g.has_edge(g.index_of(b), g.index_of(a)));
        }
    }
}

TEST_CASE("condensation components equal mutual reachability classes") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ConceptGraph g = random_graph(18, 0.12, seed);
        const Condensation c = condense(g);
        const auto r = reachability(g);
        for (std::size_t u = 0; u < g.size(); ++u) {
            for (std::size_t v = 0; v < g.size(); ++v) {
                CHECK((c.component[u] == c.component[v]) == (r[u][v] && r[v][u]));
            }
        }
        std::vector<int> pos(c.members.size());
        for (std::size_t i = 0; i < c.topological_order.size(); ++i) pos[static_cast<std::size_t>(c.topological_order[i])] = static_cast<int>(i);
        for (std::size_t k = 0; k < c.successors.size(); ++k) {
            for (int s : c.successors[k]) CHECK(pos[k] < pos[static_cast<std::size_t>(s)]);
        }
    }
}

TEST_CASE("longest path: valid and optimal on DAGs") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        // Forward edges only, so the graph is acyclic.
        Rng rng(seed);
        std::vector<Edge> edges;
        for (int i = 0; i < 14; ++i)
            for (int j = i + 1; j < 14; ++j)
                if (uniform01(rng) < 0.2) edges.emplace_back(i, j);
        const ConceptGraph g(letter_names(14), edges);
        const auto path = longest_condensation_path(g);
        CHECK(path.size() == brute_longest_dag_path(g));
        for (std::size_t i = 1; i < path.size(); ++i) CHECK(g.has_edge(path[i - 1], path[i]));
    }
}

TEST_CASE("longest path on cyclic graphs expands components adjacently") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ConceptGraph g = random_graph(16, 0.1, seed);
        const Condensation c = condense(g);
        const auto path = longest_condensation_path(g);
        std::vector<int> seen(g.size(), 0);
        for (int v : path) CHECK(++seen[static_cast<std::size_t>(v)] == 1);
        for (std::size_t i = 1; i < path.size(); ++i) {
            const int a = path[i - 1], b = path[i];
            const int ca = c.component[static_cast<std::size_t>(a)], cb = c.component[static_cast<std::size_t>(b)];
            const auto& succ = c.successors[static_cast<std::size_t>(ca)];
            CHECK((ca == cb || std::find(succ.begin(), succ.end(), cb) != succ.end()));
        }
    }
}

TEST_CASE("longest path counts both members of a two-cycle") {
    const ConceptGraph g({"A", "B", "C", "D"}, {{0, 1}, {1, 0}, {1, 2}, {2, 3}});
    CHECK(graph_statistics(g).longest_path == std::vector<std::string>{"A", "B", "C", "D"});
    CHECK(graph_statistics(g).mutual_pairs.size() == 1);
}

TEST_CASE("normalized adjacency examples") {
    const ConceptGraph two({"A", "B"}, {});
    CHECK(normalized_adjacency(two).isApprox(Matrix::Identity(2, 2)));
    const ConceptGraph one_edge({"A", "B"}, {{0, 1}});
    const Matrix a = normalized_adjacency(one_edge);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5));
    AdjacencyOptions no_loops;
    no_loops.add_self_loops = false;
    const ConceptGraph lonely({"A", "B", "Lonely"}, {{0, 1}});
    try {
        normalized_adjacency(lonely, no_loops);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("Lonely") != std::string::npos);
    }
}

TEST_CASE("normalized adjacency is exactly symmetric with bounded entries") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Matrix a = normalized_adjacency(random_graph(30, 0.05, seed));
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.maxCoeff() <= 1.0);
        CHECK(all_finite(a));
    }
}

TEST_CASE("parallel edge weights enter the adjacency") {
    const std::vector<Edge> edges{{0, 1}, {1, 2}};
    const std::vector<double> w{3.0, 1.0};
    const Matrix a = adjacency_matrix(3, edges, {}, &w);
    CHECK(a(0, 1) == 3.0);
    CHECK(a(1, 0) == 3.0);
    CHECK(a(2, 2) == 1.0);
}

TEST_CASE("cohen kappa") {
    CHECK(cohen_kappa({1, 0, 1, 1}, {1, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(cohen_kappa({1, 0, 1, 0}, {1, 1, 0, 0}) == doctest::Approx(0.0));
    CHECK(cohen_kappa({0, 0, 0}, {0, 0, 0}) == doctest::Approx(1.0));
    // p_o = 0.8, p_e = 0.6*0.4 + 0.4*0.6 = 0.48 -> 0.32/0.52
    CHECK(cohen_kappa({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0}) == doctest::Approx((0.6 - 0.52) / 0.48));
    CHECK_THROWS_AS(cohen_kappa({1}, {1, 0}), Error);
    CHECK_THROWS_AS(cohen_kappa({}, {}), Error);
}

TEST_CASE("annotator kappa over ordered pairs") {
    // 6 ordered pairs; a = {01, 12}, b = {01}: agreement 5/6.
    const double po = 5.0 / 6.0;
    const double pe = (2.0 / 6.0) * (1.0 / 6.0) + (4.0 / 6.0) * (5.0 / 6.0);
    CHECK(annotator_kappa(3, {{0, 1}, {1, 2}}, {{0, 1}}) == doctest::Approx((po - pe) / (1 - pe)));
}

TEST_CASE("exports") {
    const ConceptGraph g({"A", "B", "C"}, {{0, 1}});
    const std::string dot = to_dot(g, nullptr, true);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("n0 -> n1") != std::string::npos);
    CHECK(dot.find("label=\"A\"") != std::string::npos);
    CHECK(dot.find("label=\"C\"") == std::string::npos);
    const Json j = graph_to_json(g);
    CHECK(j["edges"].size() == 1);
    CHECK(j["vertices"].size() == 3);

    TempDir dir("graph_roundtrip");
    write_graph_dir(dir.path, g);
    const ConceptGraph back = load_graph_dir(dir.path);
    CHECK(back.names() == g.names());
    CHECK(back.edges() == g.edges());
}
