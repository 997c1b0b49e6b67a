#pragma once

#include "prereq/common.hpp"
#include "prereq/corpus.hpp"
#include "prereq/embed.hpp"
#include "prereq/gae.hpp"
#include "prereq/graph.hpp"
#include "prereq/pairclf.hpp"
#include "prereq/serialize.hpp"

#include <string>
#include <vector>

namespace prereq {

struct LabeledPair {
    int src = 0;
    int tgt = 0;
    int label = 0;

    friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

struct FoldSplit {
    int fold_id = 0;
    std::uint64_t seed = 0;
    std::vector<LabeledPair> test_pairs;
    std::vector<LabeledPair> train_pairs;
};

/// k folds over disjoint blocks of a seeded positive permutation; each test set holds
/// floor(test_pos_frac * |E|) positives plus as many uniformly drawn negatives. Every
/// other ordered pair is training data.
std::vector<FoldSplit> make_folds(const ConceptGraph& g, int k = 5, double test_pos_frac = 0.1,
                                  std::uint64_t seed = 1);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    /// Set when a denominator was zero and the value was reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;

    Json to_json() const;
};

Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& gold);
/// Harmonic mean; 0 when both inputs are 0.
double f1_score(double precision, double recall);

enum class Method { NB, SVM, LR, RF, GAE, VGAE };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);
const std::vector<Method>& all_methods();

struct ExperimentConfig {
    int folds = 5;
    double test_pos_frac = 0.1;
    std::uint64_t seed = 1;
    EmbedConfig embed;
    ClassifierHyper classifier;
    GaeConfig gae;
    /// Feed oversampled positives to GAE/VGAE as parallel edges.
    bool oversample_gae = false;
    /// Control run: permute training labels before oversampling.
    bool shuffle_train_labels = false;
    double threshold = 0.5;

    Json to_json() const;
    static ExperimentConfig from_json(const Json& j);
};

struct PairPrediction {
    int src = 0;
    int tgt = 0;
    int gold = 0;
    int predicted = 0;
    double score = 0.0;
};

struct FoldResult {
    int fold_id = 0;
    Metrics metrics;
    std::vector<PairPrediction> predictions;
};

struct MethodResult {
    Method method = Method::SVM;
    double precision = 0.0, recall = 0.0, f1 = 0.0;  // arithmetic means over folds
    std::vector<FoldResult> folds;
};

struct SettingResult {
    std::string setting;
    std::vector<MethodResult> methods;
};

struct ExperimentReport {
    std::vector<SettingResult> settings;
    Json config;

    Json to_json(bool include_predictions = false) const;
    std::string to_csv() const;
};

/// Trains and scores one method on every fold for a fixed concept matrix.
MethodResult evaluate_method(Method method, const Matrix& x, const ConceptGraph& g, const std::vector<FoldSplit>& folds,
                             const ExperimentConfig& cfg);

struct CorpusSetting {
    std::string name;
    DocumentSet documents;
};

/// Per setting: train PV-DM, embed every concept, then evaluate each method over the folds.
ExperimentReport run_experiment(const std::vector<CorpusSetting>& settings, const ConceptGraph& g,
                                const std::vector<Method>& methods, const ExperimentConfig& cfg);

struct RecoveredGraph {
    std::vector<Edge> edges;
    std::size_t vertex_count = 0;
    std::string dot;
    Json json;
};

/// Positively predicted pairs as a graph over the concepts they touch.
RecoveredGraph recover_graph(const ConceptGraph& g, const std::vector<PairPrediction>& predictions);

}  // namespace prereq
