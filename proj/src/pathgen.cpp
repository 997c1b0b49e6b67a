#include "prereq/pathgen.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <queue>
#include <set>

namespace prereq {

std::vector<std::string> LearningPath::concepts() const {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.concept_name);
    return out;
}

Json LearningPath::to_json() const {
    Json steps_json = Json::array();
    for (const auto& s : steps) {
        Json res = Json::array();
        for (const auto& r : s.resources) res.push_back({{"id", r.id}, {"path", r.path}});
        Json js{{"concept", s.concept_name}, {"resources", res}};
        if (s.unmapped) js["unmapped"] = true;
        steps_json.push_back(std::move(js));
    }
    Json j{{"target", target}, {"steps", steps_json}, {"excluded_known", excluded_known}};
    if (explanation) j["explanation"] = *explanation;
    return j;
}

namespace {

int require(const ConceptGraph& g, const std::string& name) {
    const auto idx = g.find(name);
    if (!idx) throw UnknownConcept(name);
    return *idx;
}

}  // namespace

LearningPath prerequisite_closure(const ConceptGraph& g, const std::string& target,
                                  const std::vector<std::string>& known, const ClosureOptions& opt) {
    if (opt.max_depth < 0) throw Error("prerequisite_closure: max_depth must be >= 0");
    const int t = require(g, target);
    std::vector<bool> is_known(g.size(), false);
    for (const auto& k : known) is_known[static_cast<std::size_t>(require(g, k))] = true;

    LearningPath path;
    path.target = g.name(t);
    if (is_known[static_cast<std::size_t>(t)]) {
        path.explanation = "target '" + g.name(t) + "' is already known; nothing to study";
        return path;
    }

    // Reverse breadth-first search from the target.
    std::vector<int> depth(g.size(), -1);
    std::deque<int> queue{t};
    depth[static_cast<std::size_t>(t)] = 0;
    std::set<std::string> excluded;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        const int dv = depth[static_cast<std::size_t>(v)];
        if (opt.max_depth > 0 && dv >= opt.max_depth) continue;
        if (opt.prune_satisfied && v != t && is_known[static_cast<std::size_t>(v)]) continue;
        for (int u : g.predecessors(v)) {
            if (depth[static_cast<std::size_t>(u)] >= 0) continue;
            depth[static_cast<std::size_t>(u)] = dv + 1;
            queue.push_back(u);
        }
    }

    // Known ancestors stay in the condensation so order through them is kept, but are not emitted.
    std::vector<bool> active(g.size(), false);
    for (std::size_t v = 0; v < g.size(); ++v) {
        if (depth[v] < 0) continue;
        active[v] = true;
        if (is_known[v]) excluded.insert(g.name(static_cast<int>(v)));
    }
    path.excluded_known.assign(excluded.begin(), excluded.end());

    const Condensation c = condense(g, active);
    const auto ncomp = c.members.size();
    // Component key: largest member out-degree, then smallest member name.
    std::vector<std::size_t> comp_degree(ncomp, 0);
    for (std::size_t k = 0; k < ncomp; ++k) {
        for (int v : c.members[k]) comp_degree[k] = std::max(comp_degree[k], g.out_degree(v));
    }
    auto later = [&](int a, int b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        if (comp_degree[ua] != comp_degree[ub]) return comp_degree[ua] < comp_degree[ub];
        return g.name(c.members[ua].front()) > g.name(c.members[ub].front());
    };
    std::vector<int> indeg(ncomp, 0);
    for (const auto& succ : c.successors) {
        for (int s : succ) ++indeg[static_cast<std::size_t>(s)];
    }
    std::priority_queue<int, std::vector<int>, decltype(later)> ready(later);
    for (std::size_t k = 0; k < ncomp; ++k) {
        if (indeg[k] == 0) ready.push(static_cast<int>(k));
    }
    const int target_comp = c.component[static_cast<std::size_t>(t)];
    while (!ready.empty()) {
        const int k = ready.top();
        ready.pop();
        const auto& members = c.members[static_cast<std::size_t>(k)];
        for (int v : members) {
            if (v != t && !is_known[static_cast<std::size_t>(v)]) path.steps.push_back({g.name(v), {}, false});
        }
        if (k == target_comp) path.steps.push_back({g.name(t), {}, false});
        for (int s : c.successors[static_cast<std::size_t>(k)]) {
            if (--indeg[static_cast<std::size_t>(s)] == 0) ready.push(s);
        }
    }
    return path;
}

ResourceIndex::ResourceIndex(const DocumentSet& docs) {
    for (const auto& d : docs.documents()) {
        if (d.taxonomy_label) add(*d.taxonomy_label, {d.id, d.source_path});
    }
}

void ResourceIndex::add(const std::string& label, ResourceRef ref) {
    by_label_[casefold(trim(label))].push_back(std::move(ref));
}

const std::vector<ResourceRef>* ResourceIndex::find(const std::string& label) const {
    const auto it = by_label_.find(casefold(trim(label)));
    return it == by_label_.end() ? nullptr : &it->second;
}

void TaxonomyMapping::add_override(const std::string& concept_name, const std::string& label) {
    auto& labels = overrides_[casefold(trim(concept_name))];
    const std::string l = casefold(trim(label));
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
}

std::vector<std::string> TaxonomyMapping::labels_for(const std::string& concept_name) const {
    const std::string key = casefold(trim(concept_name));
    const auto it = overrides_.find(key);
    if (it != overrides_.end()) return it->second;
    return {key};
}

TaxonomyMapping TaxonomyMapping::read_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read taxonomy mapping " + path.string());
    TaxonomyMapping m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected concept<TAB>label");
        }
        m.add_override(line.substr(0, tab), line.substr(tab + 1));
    }
    return m;
}

std::vector<ResourceRef> concept_resources(const std::string& concept_name, const ResourceIndex& index,
                                           const TaxonomyMapping& mapping) {
    std::vector<ResourceRef> out;
    std::set<std::string> seen;
    for (const auto& label : mapping.labels_for(concept_name)) {
        if (const auto* docs = index.find(label)) {
            for (const auto& r : *docs) {
                if (seen.insert(r.id).second) out.push_back(r);
            }
        }
    }
    return out;
}

LearningPath attach_resources(LearningPath path, const ResourceIndex& index, const TaxonomyMapping& mapping,
                              std::size_t max_resources) {
    for (auto& step : path.steps) {
        bool mapped = false;
        for (const auto& label : mapping.labels_for(step.concept_name)) mapped = mapped || index.find(label);
        step.unmapped = !mapped;
        auto res = concept_resources(step.concept_name, index, mapping);
        if (res.size() > max_resources) res.resize(max_resources);
        step.resources = std::move(res);
    }
    return path;
}

}  // namespace prereq
