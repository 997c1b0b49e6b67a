#include "prereq/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

namespace prereq {

namespace fs = std::filesystem;

ConceptGraph::ConceptGraph(std::vector<std::string> names, std::vector<Edge> edges) {
    const int n = static_cast<int>(names.size());
    concepts_.reserve(names.size());
    for (int i = 0; i < n; ++i) {
        std::string key = casefold(trim(names[static_cast<std::size_t>(i)]));
        if (!by_name_.emplace(key, i).second) {
            throw Error("duplicate concept name '" + names[static_cast<std::size_t>(i)] + "'");
        }
        concepts_.push_back({i, std::move(names[static_cast<std::size_t>(i)])});
    }
    for (const auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= n || v >= n) throw Error("edge index out of range");
        if (u == v) throw Error("self-loop on concept '" + concepts_[static_cast<std::size_t>(u)].name + "'");
        edge_set_.insert({u, v});
    }
    edges_.assign(edge_set_.begin(), edge_set_.end());
    out_.assign(names.size(), {});
    in_.assign(names.size(), {});
    for (const auto& [u, v] : edges_) {
        out_[static_cast<std::size_t>(u)].push_back(v);
        in_[static_cast<std::size_t>(v)].push_back(u);
    }
}

std::vector<std::string> ConceptGraph::names() const {
    std::vector<std::string> out;
    out.reserve(concepts_.size());
    for (const auto& c : concepts_) out.push_back(c.name);
    return out;
}

std::optional<int> ConceptGraph::find(std::string_view name) const {
    auto it = by_name_.find(casefold(trim(name)));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

int ConceptGraph::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw Error("unknown concept '" + std::string(name) + "'");
}

ConceptGraph ConceptGraph::with_edges(std::vector<Edge> edges) const {
    return ConceptGraph(names(), std::move(edges));
}

MergeMode parse_merge_mode(std::string_view s) {
    const std::string f = casefold(s);
    if (f == "intersection") return MergeMode::Intersection;
    if (f == "union") return MergeMode::Union;
    if (f == "single") return MergeMode::Single;
    throw Error("unknown merge mode '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) out.push_back(field);
    return out;
}

bool parse_int(std::string_view s, int& out) {
    s = trim(s);
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace

std::vector<std::string> read_concepts_tsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open concepts file " + path.string());
    std::map<int, std::string> by_index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        int idx = 0;
        if (fields.size() < 2 || !parse_int(fields[0], idx)) {
            if (by_index.empty() && line_no == 1) continue;  // header
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected 'index<TAB>name'");
        }
        if (!by_index.emplace(idx, std::string(trim(fields[1]))).second) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": duplicate index " + std::to_string(idx));
        }
    }
    std::vector<std::string> names;
    int expected = 0;
    for (auto& [idx, name] : by_index) {
        if (idx != expected++) throw Error(path.string() + ": concept indices are not dense from 0");
        names.push_back(std::move(name));
    }
    return names;
}

std::vector<Edge> read_edges_tsv(const fs::path& path, const ConceptGraph& vertices, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open edge file " + path.string());
    std::vector<Edge> edges;
    std::set<Edge> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        auto fields = split_tabs(line);
        if (fields.size() < 2) throw Error(where + ": expected 'source<TAB>target'");
        auto u = vertices.find(fields[0]);
        if (!u) throw Error(where + ": unknown concept '" + std::string(trim(fields[0])) + "'");
        auto v = vertices.find(fields[1]);
        if (!v) throw Error(where + ": unknown concept '" + std::string(trim(fields[1])) + "'");
        if (*u == *v) throw Error(where + ": self-loop on '" + std::string(trim(fields[0])) + "'");
        if (!seen.insert({*u, *v}).second) {
            if (warnings) warnings->push_back(where + ": duplicate edge ignored");
            continue;
        }
        edges.emplace_back(*u, *v);
    }
    return edges;
}

ConceptGraph load_concept_graph(const fs::path& concepts_file, const std::vector<fs::path>& annotator_files,
                                MergeMode merge, std::vector<std::string>* warnings) {
    if (annotator_files.empty()) throw Error("load_concept_graph: at least one edge file is required");
    const ConceptGraph vertices(read_concepts_tsv(concepts_file), {});
    std::vector<std::set<Edge>> sets;
    for (const auto& f : annotator_files) {
        auto e = read_edges_tsv(f, vertices, warnings);
        sets.emplace_back(e.begin(), e.end());
        if (merge == MergeMode::Single) break;
    }
    std::set<Edge> merged = sets.front();
    for (std::size_t i = 1; i < sets.size(); ++i) {
        std::set<Edge> next;
        if (merge == MergeMode::Intersection) {
            std::set_intersection(merged.begin(), merged.end(), sets[i].begin(), sets[i].end(),
                                  std::inserter(next, next.end()));
        } else {
            std::set_union(merged.begin(), merged.end(), sets[i].begin(), sets[i].end(),
                           std::inserter(next, next.end()));
        }
        merged = std::move(next);
    }
    return vertices.with_edges({merged.begin(), merged.end()});
}

ConceptGraph load_graph_dir(const fs::path& dir, MergeMode merge, std::vector<std::string>* warnings) {
    if (!fs::is_directory(dir)) throw Error("graph directory not found: " + dir.string());
    std::vector<fs::path> edge_files;
    if (fs::exists(dir / "edges.tsv")) {
        edge_files.push_back(dir / "edges.tsv");
        merge = MergeMode::Single;
    } else {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("edges_annotator", 0) == 0 && entry.path().extension() == ".tsv") {
                edge_files.push_back(entry.path());
            }
        }
        std::sort(edge_files.begin(), edge_files.end());
    }
    if (edge_files.empty()) throw Error("no edges.tsv or edges_annotator*.tsv in " + dir.string());
    return load_concept_graph(dir / "concepts.tsv", edge_files, merge, warnings);
}

void write_graph_dir(const fs::path& dir, const ConceptGraph& g) {
    fs::create_directories(dir);
    std::ofstream c(dir / "concepts.tsv");
    c << "index\tname\n";
    for (const auto& con : g.concepts()) c << con.index << '\t' << con.name << '\n';
    std::ofstream e(dir / "edges.tsv");
    for (const auto& [u, v] : g.edges()) e << g.name(u) << '\t' << g.name(v) << '\n';
    if (!c || !e) throw Error("failed writing graph to " + dir.string());
}

// ---------------------------------------------------------------------------

Condensation condense(const ConceptGraph& g, const std::vector<bool>& active) {
    const int n = static_cast<int>(g.size());
    auto is_active = [&](int v) { return active.empty() || active[static_cast<std::size_t>(v)]; };

    // Iterative Tarjan.
    std::vector<int> index(g.size(), -1), low(g.size(), 0), comp(g.size(), -1);
    std::vector<bool> on_stack(g.size(), false);
    std::vector<int> stack;
    std::vector<std::pair<int, std::size_t>> call;
    int counter = 0, ncomp = 0;
    for (int root = 0; root < n; ++root) {
        if (!is_active(root) || index[static_cast<std::size_t>(root)] >= 0) continue;
        call.emplace_back(root, 0);
        while (!call.empty()) {
            auto& [v, next] = call.back();
            const auto vs = static_cast<std::size_t>(v);
            if (next == 0 && index[vs] < 0) {
                index[vs] = low[vs] = counter++;
                stack.push_back(v);
                on_stack[vs] = true;
            }
            const auto& succ = g.successors(v);
            bool descended = false;
            while (next < succ.size()) {
                const int w = succ[next++];
                const auto ws = static_cast<std::size_t>(w);
                if (!is_active(w)) continue;
                if (index[ws] < 0) {
                    call.emplace_back(w, 0);
                    descended = true;
                    break;
                }
                if (on_stack[ws]) low[vs] = std::min(low[vs], index[ws]);
            }
            if (descended) continue;
            if (low[vs] == index[vs]) {
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[static_cast<std::size_t>(w)] = false;
                    comp[static_cast<std::size_t>(w)] = ncomp;
                } while (w != v);
                ++ncomp;
            }
            const int finished = v;
            call.pop_back();
            if (!call.empty()) {
                const auto ps = static_cast<std::size_t>(call.back().first);
                low[ps] = std::min(low[ps], low[static_cast<std::size_t>(finished)]);
            }
        }
    }

    Condensation c;
    c.component = comp;
    c.members.assign(static_cast<std::size_t>(ncomp), {});
    for (int v = 0; v < n; ++v) {
        if (comp[static_cast<std::size_t>(v)] >= 0) c.members[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])].push_back(v);
    }
    for (auto& m : c.members) {
        std::sort(m.begin(), m.end(), [&](int a, int b) { return casefold(g.name(a)) < casefold(g.name(b)); });
    }
    std::vector<std::set<int>> succ(static_cast<std::size_t>(ncomp));
    for (const auto& [u, v] : g.edges()) {
        if (!is_active(u) || !is_active(v)) continue;
        const int cu = comp[static_cast<std::size_t>(u)], cv = comp[static_cast<std::size_t>(v)];
        if (cu != cv) succ[static_cast<std::size_t>(cu)].insert(cv);
    }
    c.successors.reserve(succ.size());
    for (auto& s : succ) c.successors.emplace_back(s.begin(), s.end());
    // Tarjan emits components in reverse topological order.
    c.topological_order.resize(static_cast<std::size_t>(ncomp));
    std::iota(c.topological_order.rbegin(), c.topological_order.rend(), 0);
    return c;
}

std::vector<int> longest_condensation_path(const ConceptGraph& g) {
    if (g.size() == 0) return {};
    const Condensation c = condense(g);
    const std::size_t k = c.members.size();
    // best[c] = heaviest path starting at component c.
    std::vector<std::size_t> best(k, 0);
    std::vector<int> next(k, -1);
    for (auto it = c.topological_order.rbegin(); it != c.topological_order.rend(); ++it) {
        const auto ci = static_cast<std::size_t>(*it);
        std::size_t tail = 0;
        for (int s : c.successors[ci]) {
            const auto ss = static_cast<std::size_t>(s);
            if (best[ss] > tail || (best[ss] == tail && next[ci] >= 0 && s < next[ci])) {
                tail = best[ss];
                next[ci] = s;
            }
        }
        best[ci] = c.members[ci].size() + tail;
    }
    int start = c.topological_order.front();
    for (int ci : c.topological_order) {
        if (best[static_cast<std::size_t>(ci)] > best[static_cast<std::size_t>(start)]) start = ci;
    }
    std::vector<int> path;
    for (int ci = start; ci >= 0; ci = next[static_cast<std::size_t>(ci)]) {
        const auto& m = c.members[static_cast<std::size_t>(ci)];
        path.insert(path.end(), m.begin(), m.end());
    }
    return path;
}

Json GraphStats::to_json() const {
    auto ranking = [](const std::vector<DegreeEntry>& r) {
        Json a = Json::array();
        for (const auto& e : r) a.push_back({{"concept", e.concept_name}, {"degree", e.degree}});
        return a;
    };
    Json pairs = Json::array();
    for (const auto& [a, b] : mutual_pairs) pairs.push_back({a, b});
    return Json{{"vertices", vertices},
                {"edges", edges},
                {"top_in_degree", ranking(top_in)},
                {"top_out_degree", ranking(top_out)},
                {"mutual_pairs", pairs},
                {"mutual_pair_count", mutual_pairs.size()},
                {"isolated", isolated},
                {"isolated_count", isolated.size()},
                {"longest_path", longest_path},
                {"longest_path_length", longest_path.size()}};
}

GraphStats graph_statistics(const ConceptGraph& g, std::size_t k) {
    GraphStats s;
    s.vertices = g.size();
    s.edges = g.edges().size();
    const int n = static_cast<int>(g.size());

    auto rank = [&](auto degree) {
        std::vector<int> order(g.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (degree(a) != degree(b)) return degree(a) > degree(b);
            return casefold(g.name(a)) < casefold(g.name(b));
        });
        std::vector<DegreeEntry> out;
        for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back({g.name(order[i]), degree(order[i])});
        return out;
    };
    s.top_in = rank([&](int v) { return g.in_degree(v); });
    s.top_out = rank([&](int v) { return g.out_degree(v); });

    for (const auto& [u, v] : g.edges()) {
        if (u < v && g.has_edge(v, u)) s.mutual_pairs.emplace_back(g.name(u), g.name(v));
    }
    for (int v = 0; v < n; ++v) {
        if (g.in_degree(v) + g.out_degree(v) == 0) s.isolated.push_back(g.name(v));
    }
    for (int v : longest_condensation_path(g)) s.longest_path.push_back(g.name(v));
    return s;
}

Matrix adjacency_matrix(std::size_t n, const std::vector<Edge>& edges, const AdjacencyOptions& opt,
                        const std::vector<double>* weights) {
    if (weights && weights->size() != edges.size()) throw Error("adjacency_matrix: weights/edges length mismatch");
    const auto N = static_cast<Eigen::Index>(n);
    Matrix a = Matrix::Zero(N, N);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [u, v] = edges[e];
        if (u < 0 || v < 0 || u >= N || v >= N) throw Error("adjacency_matrix: edge index out of range");
        a(u, v) = weights ? std::max(a(u, v), (*weights)[e]) : 1.0;
    }
    if (opt.symmetrize) a = a.cwiseMax(a.transpose()).eval();
    if (opt.add_self_loops) a.diagonal().array() += 1.0;
    return a;
}

Matrix normalize_adjacency(const Matrix& a, const std::vector<std::string>& names) {
    if (a.rows() != a.cols()) throw Error("normalize_adjacency: matrix is not square");
    const Vector deg = a.rowwise().sum();
    Vector inv_sqrt(deg.size());
    for (Eigen::Index i = 0; i < deg.size(); ++i) {
        if (!(deg(i) > 0)) {
            const std::string who = static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)]
                                                                            : "#" + std::to_string(i);
            throw Error("normalize_adjacency: vertex '" + who + "' has zero degree; enable self-loops");
        }
        inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
    }
    return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Matrix normalized_adjacency(const ConceptGraph& g, const AdjacencyOptions& opt) {
    return normalize_adjacency(adjacency_matrix(g.size(), g.edges(), opt), g.names());
}

double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw Error("cohen_kappa: label lists differ in length");
    if (a.empty()) throw Error("cohen_kappa: empty label lists");
    const double n = static_cast<double>(a.size());
    double agree = 0, a1 = 0, b1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0, y = b[i] != 0;
        agree += x == y;
        a1 += x;
        b1 += y;
    }
    const double po = agree / n;
    const double pe = (a1 / n) * (b1 / n) + (1 - a1 / n) * (1 - b1 / n);
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1 - pe);
}

double annotator_kappa(std::size_t n, const std::vector<Edge>& a, const std::vector<Edge>& b) {
    const std::set<Edge> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::vector<int> la, lb;
    for (int i = 0; i < static_cast<int>(n); ++i) {
        for (int j = 0; j < static_cast<int>(n); ++j) {
            if (i == j) continue;
            la.push_back(sa.count({i, j}) ? 1 : 0);
            lb.push_back(sb.count({i, j}) ? 1 : 0);
        }
    }
    return cohen_kappa(la, lb);
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::string to_dot(const ConceptGraph& g, const std::vector<Edge>* edges, bool only_connected) {
    const auto& es = edges ? *edges : g.edges();
    std::vector<bool> touched(g.size(), !only_connected);
    for (const auto& [u, v] : es) touched[static_cast<std::size_t>(u)] = touched[static_cast<std::size_t>(v)] = true;
    std::ostringstream out;
    out << "digraph prerequisites {\n  rankdir=LR;\n";
    for (const auto& c : g.concepts()) {
        if (touched[static_cast<std::size_t>(c.index)]) out << "  n" << c.index << " [label=\"" << dot_escape(c.name) << "\"];\n";
    }
    for (const auto& [u, v] : es) out << "  n" << u << " -> n" << v << ";\n";
    out << "}\n";
    return out.str();
}

Json graph_to_json(const ConceptGraph& g, const std::vector<Edge>* edges) {
    const auto& es = edges ? *edges : g.edges();
    Json vs = Json::array();
    for (const auto& c : g.concepts()) vs.push_back({{"index", c.index}, {"name", c.name}});
    Json e = Json::array();
    for (const auto& [u, v] : es) e.push_back({{"source", g.name(u)}, {"target", g.name(v)}});
    return Json{{"vertices", vs}, {"edges", e}};
}

}  // namespace prereq
