#pragma once

#include "prereq/common.hpp"
#include "prereq/embed.hpp"
#include "prereq/graph.hpp"
#include "prereq/serialize.hpp"

#include <memory>
#include <string>
#include <vector>

namespace prereq {

struct PairDataset {
    std::vector<Edge> pairs;
    Matrix features;  // row i = [x_src | x_tgt]
    std::vector<int> labels;

    std::size_t size() const { return pairs.size(); }
    std::size_t positives() const;
    /// Rows at the given positions, in that order.
    PairDataset subset(const std::vector<std::size_t>& rows) const;
};

/// Feature row for one ordered pair.
Vector pair_features(const Matrix& x, int src, int tgt);

/// All ordered pairs (i, j), i != j, row-major in i then j; label 1 iff i -> j is an edge.
PairDataset build_pair_dataset(const EmbeddingMatrix& x, const ConceptGraph& g);

/// Features/labels for an explicit pair list.
PairDataset make_pairs(const Matrix& x, const std::vector<Edge>& pairs, const std::vector<int>& labels);

/// Duplicates positives uniformly with replacement until the classes balance, then
/// shuffles. Negatives are untouched. Throws on single-class input.
PairDataset oversample(const PairDataset& ds, std::uint64_t seed);

enum class ClassifierKind { NaiveBayes, LinearSvm, LogisticRegression, RandomForest };
std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view s);

struct ClassifierHyper {
    // Linear models
    double l2 = 1e-4;
    int epochs = 200;
    double learning_rate = 0.5;
    bool standardize = true;
    // Random forest
    int trees = 100;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf = 1;
    bool bootstrap = true;
    // Naive Bayes
    double variance_floor = 1e-9;
};

void to_json(Json& j, const ClassifierHyper& h);
void from_json(const Json& j, ClassifierHyper& h);

struct Prediction {
    std::vector<int> labels;
    std::vector<double> scores;
};

/// Trained classifier; immutable and safe to share across threads.
class PairClassifier {
public:
    virtual ~PairClassifier() = default;
    virtual ClassifierKind kind() const = 0;
    virtual std::size_t width() const = 0;
    /// Probability (NB, LR), vote fraction (RF) or margin (SVM) per row.
    virtual Vector decision(const Matrix& features) const = 0;
    /// Score threshold separating the classes: 0.5, or 0 for the SVM margin.
    virtual double threshold() const { return 0.5; }
    virtual Json to_json() const = 0;
};

std::unique_ptr<PairClassifier> train_classifier(ClassifierKind kind, const PairDataset& ds,
                                                 const ClassifierHyper& hyper = {}, std::uint64_t seed = 1);

/// Thresholded scores; throws when the feature width does not match the training width.
Prediction predict_pairs(const PairClassifier& clf, const Matrix& features);

Json classifier_to_json(const PairClassifier& clf);
std::unique_ptr<PairClassifier> classifier_from_json(const Json& j);

// Exposed for tests ----------------------------------------------------------

/// Mean L2-regularized log-loss of a logistic model on raw (unstandardized) features,
/// with gradient w.r.t. weights and bias.
struct LogisticLossGrad {
    double loss = 0.0;
    Vector grad_w;
    double grad_b = 0.0;
};
LogisticLossGrad logistic_loss_grad(const Matrix& x, const std::vector<int>& y, const Vector& w, double b, double l2);

/// Best (feature, threshold, weighted Gini) over candidate features for rows `idx`.
struct GiniSplit {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // size-weighted child impurity
};
GiniSplit best_gini_split(const Matrix& x, const std::vector<int>& y, const std::vector<std::size_t>& idx,
                          const std::vector<int>& features, std::size_t min_leaf);

}  // namespace prereq
