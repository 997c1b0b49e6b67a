#pragma once

#include "prereq/common.hpp"
#include "prereq/corpus.hpp"
#include "prereq/graph.hpp"

#include <vector>

namespace prereq {

/// Layered concept graph with a matching corpus whose word usage follows the layers.
struct SyntheticSpec {
    int concepts = 60;
    int layers = 4;
    int docs_per_concept = 6;
    int tokens_per_doc = 160;
    int tokens_per_slide = 32;
    int specific_words = 6;      // private vocabulary per concept
    int layer_words = 24;        // shared vocabulary per layer
    int background_words = 150;  // shared by every document
    double p_adjacent = 0.5;     // edge probability one layer apart
    double p_skip = 0.3;         // two layers apart
    double p_far = 0.15;         // further apart
    std::uint64_t seed = 7;
};

struct SyntheticData {
    ConceptGraph graph;
    DocumentSet documents;
    std::vector<int> layer;  // per concept
};

SyntheticData generate_synthetic(const SyntheticSpec& spec = {});

/// Deterministic lowercase pseudo-word, distinct for distinct indices.
std::string pseudo_word(std::size_t index);

}  // namespace prereq
