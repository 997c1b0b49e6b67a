#pragma once

#include "prereq/common.hpp"
#include "prereq/corpus.hpp"
#include "prereq/serialize.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace prereq {

struct EmbedConfig {
    int dim = 300;
    int window = 5;
    int epochs = 20;
    int negative_samples = 5;
    double learning_rate = 0.025;
    /// Final learning rate as a fraction of the initial one; decay is linear per epoch.
    double min_learning_rate_fraction = 1e-4;
    int min_count = 2;
    int infer_steps = 50;
    std::uint64_t seed = 1;
    /// When false the corresponding matrix is held fixed during training.
    bool train_word_vectors = true;
    bool train_output_weights = true;

    void validate() const;
};

void to_json(Json& j, const EmbedConfig& c);
void from_json(const Json& j, EmbedConfig& c);

/// Word vocabulary with dense indices [0, size) in descending frequency order (ties by token).
class Vocab {
public:
    static Vocab build(const DocumentSet& set, int min_count);
    std::optional<int> find(const std::string& token) const;
    std::size_t size() const { return tokens_.size(); }
    const std::string& token(int index) const { return tokens_[static_cast<std::size_t>(index)]; }
    std::int64_t count(int index) const { return counts_[static_cast<std::size_t>(index)]; }
    /// Maps tokens to indices, dropping out-of-vocabulary tokens.
    std::vector<int> encode(const std::vector<std::string>& tokens) const;

    Json to_json() const;
    static Vocab from_json(const Json& j);

private:
    void reindex();
    std::vector<std::string> tokens_;
    std::vector<std::int64_t> counts_;
    std::unordered_map<std::string, int> index_;
};

/// Unigram^0.75 noise distribution sampled by inverse CDF.
class NoiseSampler {
public:
    explicit NoiseSampler(const Vocab& vocab);
    int sample(Rng& rng) const;

private:
    std::vector<double> cdf_;
};

/// Paragraph-vector (distributed memory) model. Rows of word_vectors/output_weights
/// follow Vocab indices; rows of doc_vectors follow doc_ids.
struct PvdmModel {
    EmbedConfig config;
    Vocab vocab;
    std::vector<std::string> doc_ids;
    Matrix word_vectors;
    Matrix doc_vectors;
    Matrix output_weights;
    std::string provenance;
    /// Summed per-example loss for each training epoch.
    std::vector<double> epoch_loss;

    int dim() const { return config.dim; }
};

/// Optional starting point for training; any provided matrix replaces the seeded init.
struct PvdmInit {
    std::optional<Matrix> word_vectors;
    std::optional<Matrix> doc_vectors;
    std::optional<Matrix> output_weights;
};

/// One distributed-memory training example: predict `target` from the mean of the
/// document vector and the context word vectors, scored against `negatives`.
struct PvdmExample {
    int doc = 0;
    std::vector<int> context;
    int target = 0;
    std::vector<int> negatives;
};

struct PvdmGradient {
    double loss = 0.0;
    Vector doc;                    // d(loss)/d(doc vector)
    std::vector<Vector> context;   // one per context entry, same order
    Vector target_out;             // d(loss)/d(output row of target)
    std::vector<Vector> negative_out;
};

/// Exact loss and gradient of one example: -log s(u_t.h) - sum_n log s(-u_n.h).
PvdmGradient pvdm_example_gradient(const PvdmModel& model, const PvdmExample& ex);
/// Loss of one example only (for finite-difference checks).
double pvdm_example_loss(const PvdmModel& model, const PvdmExample& ex);

/// SGD over all documents, sequential and deterministic for a fixed seed.
PvdmModel train_pvdm(const DocumentSet& set, const EmbedConfig& cfg, const PvdmInit& init = {});

/// Optimises a fresh document vector for `tokens` with word and output weights frozen.
/// `label` names the input in error messages.
Vector infer_embedding(const PvdmModel& model, const std::vector<std::string>& tokens, int steps, double lr,
                       std::uint64_t seed, const std::string& label = "<tokens>");

struct EmbeddingMatrix {
    std::vector<std::string> concepts;
    Matrix x;

    std::size_t rows() const { return concepts.size(); }
    Json to_json() const;
    static EmbeddingMatrix from_json(const Json& j);
};

/// Row i is the inferred vector for concept i's name tokens (same seed for every row).
EmbeddingMatrix build_concept_matrix(const PvdmModel& model, const std::vector<std::string>& concepts,
                                     const TokenizeConfig& tok = {});

Json pvdm_to_json(const PvdmModel& model);
PvdmModel pvdm_from_json(const Json& j);

}  // namespace prereq
