#pragma once

#include "prereq/corpus.hpp"
#include "prereq/graph.hpp"
#include "prereq/serialize.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prereq {

/// Raised for concept names that are not graph vertices.
class UnknownConcept : public Error {
public:
    explicit UnknownConcept(const std::string& name) : Error("unknown concept '" + name + "'"), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

struct ResourceRef {
    std::string id;
    std::string path;
};

struct PathStep {
    std::string concept_name;
    std::vector<ResourceRef> resources;
    /// No taxonomy label maps to this concept.
    bool unmapped = false;
};

struct LearningPath {
    std::string target;
    std::vector<PathStep> steps;
    std::vector<std::string> excluded_known;
    std::optional<std::string> explanation;

    std::vector<std::string> concepts() const;
    Json to_json() const;
};

struct ClosureOptions {
    /// Do not search past known concepts, so prerequisites reached only through them are dropped.
    bool prune_satisfied = false;
    /// Maximum number of prerequisite hops from the target; 0 means unlimited.
    int max_depth = 0;
};

/// Unknown ancestors of `target`, ordered over the SCC condensation (ties: out-degree
/// descending, then name) and ending with the target. Names match case-insensitively.
LearningPath prerequisite_closure(const ConceptGraph& g, const std::string& target,
                                  const std::vector<std::string>& known, const ClosureOptions& opt = {});

/// Taxonomy label (casefolded) -> documents carrying it, in corpus order.
class ResourceIndex {
public:
    ResourceIndex() = default;
    explicit ResourceIndex(const DocumentSet& docs);

    void add(const std::string& label, ResourceRef ref);
    const std::vector<ResourceRef>* find(const std::string& label) const;
    bool empty() const { return by_label_.empty(); }
    std::size_t label_count() const { return by_label_.size(); }

private:
    std::map<std::string, std::vector<ResourceRef>> by_label_;
};

/// Concept -> taxonomy labels: the override table first, otherwise the label equal to
/// the casefolded concept name.
class TaxonomyMapping {
public:
    TaxonomyMapping() = default;
    void add_override(const std::string& concept_name, const std::string& label);
    std::vector<std::string> labels_for(const std::string& concept_name) const;

    /// `concept<TAB>taxonomy label` per line; `#` starts a comment.
    static TaxonomyMapping read_tsv(const std::filesystem::path& path);

private:
    std::map<std::string, std::vector<std::string>> overrides_;
};

/// Annotates each step with at most `max_resources` documents.
LearningPath attach_resources(LearningPath path, const ResourceIndex& index, const TaxonomyMapping& mapping,
                              std::size_t max_resources = 5);

/// All documents for one concept, without a cap.
std::vector<ResourceRef> concept_resources(const std::string& concept_name, const ResourceIndex& index,
                                           const TaxonomyMapping& mapping);

}  // namespace prereq
