#pragma once

#include "prereq/common.hpp"
#include "prereq/graph.hpp"
#include "prereq/pairclf.hpp"
#include "prereq/serialize.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace prereq {

struct GaeConfig {
    int epochs = 200;
    double learning_rate = 0.01;
    int hidden1 = 32;
    int hidden2 = 16;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    bool variational = false;
    /// <= 0 selects (#zero entries) / (#one entries) of the reconstruction target.
    double pos_weight = 0.0;
    /// Integer edge multiplicities in the input adjacency (oversampled positives).
    bool parallel_edge_weights = false;

    void validate() const;
};

void to_json(Json& j, const GaeConfig& c);
void from_json(const Json& j, GaeConfig& c);

/// Two-layer GCN weights. GAE uses w0/w1; VGAE uses w0 with the w_mu/w_log_sigma heads.
struct GcnParams {
    Matrix w0;
    Matrix w1;
    Matrix w_mu;
    Matrix w_log_sigma;

    /// Glorot-uniform initialisation for the configured shapes.
    static GcnParams init(Eigen::Index features, const GaeConfig& cfg);
    /// Pointers to the matrices in use, in a fixed order (w0, w1 | w0, w_mu, w_log_sigma).
    std::vector<Matrix*> active(bool variational);
    std::vector<const Matrix*> active(bool variational) const;
};

struct LatentState {
    Matrix z;
    std::optional<Matrix> mu;
    std::optional<Matrix> log_sigma;
};

/// Z = mu + exp(log_sigma) * noise, elementwise.
Matrix reparameterize(const Matrix& mu, const Matrix& log_sigma, const Matrix& noise);

/// n x f matrix of independent standard-normal draws.
Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// H = ReLU(A X W0); GAE: Z = A H W1. VGAE: mu/log_sigma heads with Z drawn using `noise`
/// (pass nullptr to use Z = mu).
LatentState gcn_encode(const Matrix& x, const Matrix& a_norm, const GcnParams& params, bool variational,
                       const Matrix* noise);
/// Convenience overload that draws the VGAE noise from `seed`.
LatentState gcn_encode(const Matrix& x, const Matrix& a_norm, const GcnParams& params, bool variational,
                       std::uint64_t seed);

/// Logits Z Z^T.
Matrix decode_logits(const Matrix& z);
/// sigmoid(Z Z^T), strictly inside (0, 1) for finite Z with moderate norms.
Matrix decode_adjacency(const Matrix& z);

/// Mean weighted binary cross-entropy over all n^2 entries, computed from logits.
double reconstruction_loss_logits(const Matrix& logits, const Matrix& target, double pos_weight);
/// Same loss from probabilities; throws if any entry is exactly 0 or 1.
double reconstruction_loss(const Matrix& probabilities, const Matrix& target, double pos_weight);

/// -1/2 sum(1 + 2 log_sigma - mu^2 - exp(2 log_sigma)).
double kl_divergence(const Matrix& mu, const Matrix& log_sigma);

struct LossBreakdown {
    double total = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;  // unscaled KL sum
};

/// Full-batch objective: reconstruction + kl_scale * KL. Holds the precomputed A X.
class GaeObjective {
public:
    GaeObjective(const Matrix& x, Matrix a_norm, Matrix target, double pos_weight, bool variational,
                 double kl_scale);

    /// Loss at `params`; fills `grads` (same layout as params) when non-null.
    /// `noise` is required for the variational objective.
    LossBreakdown evaluate(const GcnParams& params, const Matrix* noise, GcnParams* grads) const;

    const Matrix& a_norm() const { return a_norm_; }
    const Matrix& target() const { return target_; }
    double pos_weight() const { return pos_weight_; }
    double kl_scale() const { return kl_scale_; }
    bool variational() const { return variational_; }

private:
    Matrix ax_;
    Matrix a_norm_;
    Matrix target_;
    double pos_weight_;
    bool variational_;
    double kl_scale_;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
};

struct GraphAEModel {
    GcnParams params;
    GaeConfig config;
    Matrix a_norm;
    double pos_weight = 1.0;
    std::vector<EpochRecord> history;
};

/// Input adjacency and target from training edges: symmetrized, self-loops added.
/// With cfg.parallel_edge_weights, `edge_weights` gives each edge's multiplicity.
struct GaeInputs {
    Matrix a_norm;
    Matrix target;
    double pos_weight = 1.0;
};
GaeInputs make_gae_inputs(std::size_t n, const std::vector<Edge>& train_edges, const GaeConfig& cfg,
                          const std::vector<double>* edge_weights = nullptr);

/// Full-batch Adam on the (variational) graph autoencoder loss.
GraphAEModel train_graph_autoencoder(const Matrix& x, std::size_t n, const std::vector<Edge>& train_edges,
                                     const GaeConfig& cfg, const std::vector<double>* edge_weights = nullptr);
GraphAEModel train_graph_autoencoder(const Matrix& x, const ConceptGraph& g, const GaeConfig& cfg);

/// Scores sigmoid(z_i . z_j) from a deterministic encode (VGAE uses mu). Labels are score >= threshold.
Prediction predict_links(const GraphAEModel& model, const Matrix& x, const Matrix& a_norm,
                         const std::vector<Edge>& pairs, double threshold = 0.5);

Json gae_to_json(const GraphAEModel& m);
GraphAEModel gae_from_json(const Json& j);
/// One JSON object per line: {"epoch","loss","recon","kl"}.
void write_training_log(std::ostream& out, const GraphAEModel& m);

}  // namespace prereq
