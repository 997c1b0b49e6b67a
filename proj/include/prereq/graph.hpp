#pragma once

#include "prereq/common.hpp"
#include "prereq/serialize.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace prereq {

struct Concept {
    int index = 0;
    std::string name;
};

using Edge = std::pair<int, int>;  // (prerequisite, concept)

/// Directed prerequisite graph: edge (u, v) means u is a prerequisite of v.
/// Immutable after construction; edges are kept sorted and unique.
class ConceptGraph {
public:
    ConceptGraph() = default;
    /// Throws on duplicate names (case-insensitive), out-of-range indices or self-loops.
    ConceptGraph(std::vector<std::string> names, std::vector<Edge> edges);

    std::size_t size() const { return concepts_.size(); }
    const std::vector<Concept>& concepts() const { return concepts_; }
    const std::string& name(int i) const { return concepts_[static_cast<std::size_t>(i)].name; }
    std::vector<std::string> names() const;
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_edge(int u, int v) const { return edge_set_.count({u, v}) != 0; }
    /// Case-insensitive lookup.
    std::optional<int> find(std::string_view name) const;
    /// Like find() but throws Error("unknown concept ...").
    int index_of(std::string_view name) const;

    const std::vector<int>& successors(int u) const { return out_[static_cast<std::size_t>(u)]; }
    const std::vector<int>& predecessors(int v) const { return in_[static_cast<std::size_t>(v)]; }
    std::size_t out_degree(int u) const { return successors(u).size(); }
    std::size_t in_degree(int v) const { return predecessors(v).size(); }

    /// Same vertex set, different edges.
    ConceptGraph with_edges(std::vector<Edge> edges) const;

private:
    std::vector<Concept> concepts_;
    std::vector<Edge> edges_;
    std::set<Edge> edge_set_;
    std::unordered_map<std::string, int> by_name_;
    std::vector<std::vector<int>> out_, in_;
};

enum class MergeMode { Intersection, Union, Single };
MergeMode parse_merge_mode(std::string_view s);

/// Reads `index<TAB>name` lines. A non-numeric first line is treated as a header.
std::vector<std::string> read_concepts_tsv(const std::filesystem::path& path);

/// Reads `source<TAB>target` lines (concept names, case-insensitive; '#' starts a comment).
/// Unknown names throw with file:line; duplicate lines append to `warnings` and are dropped.
std::vector<Edge> read_edges_tsv(const std::filesystem::path& path, const ConceptGraph& vertices,
                                 std::vector<std::string>* warnings = nullptr);

/// `single` uses the first annotator file only.
ConceptGraph load_concept_graph(const std::filesystem::path& concepts_file,
                                const std::vector<std::filesystem::path>& annotator_files, MergeMode merge,
                                std::vector<std::string>* warnings = nullptr);

/// Directory form: concepts.tsv plus edges.tsv or edges_annotator*.tsv (sorted by name).
ConceptGraph load_graph_dir(const std::filesystem::path& dir, MergeMode merge = MergeMode::Intersection,
                            std::vector<std::string>* warnings = nullptr);

void write_graph_dir(const std::filesystem::path& dir, const ConceptGraph& g);

// ---------------------------------------------------------------------------
// Strongly connected components

struct Condensation {
    std::vector<int> component;                 // vertex -> component id
    std::vector<std::vector<int>> members;      // component -> vertices sorted by name
    std::vector<std::vector<int>> successors;   // component DAG, sorted and unique
    std::vector<int> topological_order;         // components, sources first
};

/// Tarjan SCC on the subgraph induced by `active` (all vertices when empty).
Condensation condense(const ConceptGraph& g, const std::vector<bool>& active = {});

// ---------------------------------------------------------------------------
// Analytics

struct DegreeEntry {
    std::string concept_name;
    std::size_t degree = 0;
};

struct GraphStats {
    std::size_t vertices = 0;
    std::size_t edges = 0;
    std::vector<DegreeEntry> top_in;
    std::vector<DegreeEntry> top_out;
    std::vector<std::pair<std::string, std::string>> mutual_pairs;
    std::vector<std::string> isolated;
    std::vector<std::string> longest_path;

    Json to_json() const;
};

/// Degree rankings (degree descending, ties by name), 2-cycles, isolated vertices and
/// the longest path over the SCC condensation weighted by component size.
GraphStats graph_statistics(const ConceptGraph& g, std::size_t k = 15);

/// Longest path as vertex indices; consecutive entries are an edge or share a component.
std::vector<int> longest_condensation_path(const ConceptGraph& g);

struct AdjacencyOptions {
    bool add_self_loops = true;
    bool symmetrize = true;
};

/// Dense adjacency from an edge list. `weights`, when given, are per-edge multiplicities
/// (parallel edges); symmetrization takes the elementwise max of A and A^T.
Matrix adjacency_matrix(std::size_t n, const std::vector<Edge>& edges, const AdjacencyOptions& opt,
                        const std::vector<double>* weights = nullptr);

/// D^-1/2 A D^-1/2 with D the row sums of `a`. Throws naming the first zero-degree vertex.
Matrix normalize_adjacency(const Matrix& a, const std::vector<std::string>& names = {});

Matrix normalized_adjacency(const ConceptGraph& g, const AdjacencyOptions& opt = {});

/// (p_o - p_e) / (1 - p_e); 1 when p_e == 1 and the lists agree everywhere.
double cohen_kappa(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

/// Kappa over all ordered pairs (i != j) of two annotators' edge sets.
double annotator_kappa(std::size_t n, const std::vector<Edge>& a, const std::vector<Edge>& b);

/// DOT export; `edges` defaults to the graph's own edges. Only vertices touching an edge
/// are emitted when `only_connected` is set.
std::string to_dot(const ConceptGraph& g, const std::vector<Edge>* edges = nullptr, bool only_connected = false);
Json graph_to_json(const ConceptGraph& g, const std::vector<Edge>* edges = nullptr);

}  // namespace prereq
