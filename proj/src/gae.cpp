#include "prereq/gae.hpp"

#include <ostream>

namespace prereq {

void GaeConfig::validate() const {
    if (epochs <= 0) throw Error("gae config: epochs must be positive");
    if (!(learning_rate > 0)) throw Error("gae config: learning_rate must be positive");
    if (hidden1 <= 0 || hidden2 <= 0) throw Error("gae config: hidden sizes must be positive");
}

void to_json(Json& j, const GaeConfig& c) {
    j = Json{{"epochs", c.epochs},         {"learning_rate", c.learning_rate},
             {"hidden1", c.hidden1},       {"hidden2", c.hidden2},
             {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
             {"adam_eps", c.adam_eps},     {"seed", c.seed},
             {"variational", c.variational}, {"pos_weight", c.pos_weight},
             {"parallel_edge_weights", c.parallel_edge_weights}};
}

void from_json(const Json& j, GaeConfig& c) {
    const GaeConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.hidden1 = j.value("hidden1", d.hidden1);
    c.hidden2 = j.value("hidden2", d.hidden2);
    c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
    c.adam_eps = j.value("adam_eps", d.adam_eps);
    c.seed = j.value("seed", d.seed);
    c.variational = j.value("variational", d.variational);
    c.pos_weight = j.value("pos_weight", d.pos_weight);
    c.parallel_edge_weights = j.value("parallel_edge_weights", d.parallel_edge_weights);
}

namespace {

Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double range = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * range;
    }
    return m;
}

Matrix relu(const Matrix& m) {
    return m.cwiseMax(0.0);
}

}  // namespace

GcnParams GcnParams::init(Eigen::Index features, const GaeConfig& cfg) {
    Rng rng(mix_seed(cfg.seed, 21));
    GcnParams p;
    p.w0 = glorot(features, cfg.hidden1, rng);
    p.w1 = glorot(cfg.hidden1, cfg.hidden2, rng);
    p.w_mu = glorot(cfg.hidden1, cfg.hidden2, rng);
    p.w_log_sigma = glorot(cfg.hidden1, cfg.hidden2, rng);
    return p;
}

std::vector<Matrix*> GcnParams::active(bool variational) {
    if (variational) return {&w0, &w_mu, &w_log_sigma};
    return {&w0, &w1};
}

std::vector<const Matrix*> GcnParams::active(bool variational) const {
    if (variational) return {&w0, &w_mu, &w_log_sigma};
    return {&w0, &w1};
}

Matrix reparameterize(const Matrix& mu, const Matrix& log_sigma, const Matrix& noise) {
    if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols() || mu.rows() != noise.rows() ||
        mu.cols() != noise.cols()) {
        throw Error("reparameterize: shape mismatch");
    }
    return mu + (log_sigma.array().exp() * noise.array()).matrix();
}

Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = standard_normal(rng);
    }
    return m;
}

namespace {

void check_encode_shapes(const Matrix& x, const Matrix& a, const GcnParams& p, bool variational) {
    if (a.rows() != a.cols() || a.rows() != x.rows()) throw Error("gcn_encode: adjacency is not n x n for n = rows(X)");
    if (p.w0.rows() != x.cols()) throw Error("gcn_encode: W0 rows do not match feature width");
    const Matrix& head = variational ? p.w_mu : p.w1;
    if (head.rows() != p.w0.cols()) throw Error("gcn_encode: second-layer weights do not match hidden width");
    if (variational && (p.w_log_sigma.rows() != p.w_mu.rows() || p.w_log_sigma.cols() != p.w_mu.cols())) {
        throw Error("gcn_encode: mu/log_sigma heads differ in shape");
    }
}

}  // namespace

LatentState gcn_encode(const Matrix& x, const Matrix& a_norm, const GcnParams& params, bool variational,
                       const Matrix* noise) {
    check_encode_shapes(x, a_norm, params, variational);
    const Matrix hidden = relu(a_norm * (x * params.w0));
    const Matrix q = a_norm * hidden;
    LatentState s;
    if (!variational) {
        s.z = q * params.w1;
        return s;
    }
    s.mu = q * params.w_mu;
    s.log_sigma = q * params.w_log_sigma;
    s.z = noise ? reparameterize(*s.mu, *s.log_sigma, *noise) : *s.mu;
    return s;
}

LatentState gcn_encode(const Matrix& x, const Matrix& a_norm, const GcnParams& params, bool variational,
                       std::uint64_t seed) {
    if (!variational) return gcn_encode(x, a_norm, params, false, nullptr);
    Rng rng(mix_seed(seed, 22));
    const Matrix noise = standard_normal_matrix(x.rows(), params.w_mu.cols(), rng);
    return gcn_encode(x, a_norm, params, true, &noise);
}

Matrix decode_logits(const Matrix& z) {
    return z * z.transpose();
}

Matrix decode_adjacency(const Matrix& z) {
    return decode_logits(z).unaryExpr([](double v) { return sigmoid(v); });
}

double reconstruction_loss_logits(const Matrix& logits, const Matrix& target, double pos_weight) {
    if (logits.rows() != target.rows() || logits.cols() != target.cols()) {
        throw Error("reconstruction_loss: shape mismatch");
    }
    double sum = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const double t = target(r, c), l = logits(r, c);
            sum += pos_weight * t * softplus(-l) + (1.0 - t) * softplus(l);
        }
    }
    return sum / static_cast<double>(logits.size());
}

double reconstruction_loss(const Matrix& probabilities, const Matrix& target, double pos_weight) {
    Matrix logits(probabilities.rows(), probabilities.cols());
    for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
        for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
            const double p = probabilities(r, c);
            if (!(p > 0.0 && p < 1.0)) {
                throw Error("reconstruction_loss: probability outside (0,1); use reconstruction_loss_logits");
            }
            logits(r, c) = std::log(p) - std::log1p(-p);
        }
    }
    return reconstruction_loss_logits(logits, target, pos_weight);
}

double kl_divergence(const Matrix& mu, const Matrix& log_sigma) {
    if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols()) throw Error("kl_divergence: shape mismatch");
    const auto ls = log_sigma.array();
    return -0.5 * (1.0 + 2.0 * ls - mu.array().square() - (2.0 * ls).exp()).sum();
}

// ---------------------------------------------------------------------------

GaeObjective::GaeObjective(const Matrix& x, Matrix a_norm, Matrix target, double pos_weight, bool variational,
                           double kl_scale)
    : ax_(a_norm * x),
      a_norm_(std::move(a_norm)),
      target_(std::move(target)),
      pos_weight_(pos_weight),
      variational_(variational),
      kl_scale_(kl_scale) {
    if (a_norm_.rows() != x.rows() || target_.rows() != x.rows() || target_.cols() != x.rows()) {
        throw Error("GaeObjective: adjacency/target shape does not match feature rows");
    }
}

LossBreakdown GaeObjective::evaluate(const GcnParams& p, const Matrix* noise, GcnParams* grads) const {
    const auto n = static_cast<double>(a_norm_.rows());
    const Matrix pre = ax_ * p.w0;
    const Matrix hidden = relu(pre);
    const Matrix q = a_norm_ * hidden;

    Matrix z, mu, log_sigma;
    if (variational_) {
        if (!noise) throw Error("GaeObjective: variational objective needs a noise matrix");
        mu = q * p.w_mu;
        log_sigma = q * p.w_log_sigma;
        z = reparameterize(mu, log_sigma, *noise);
    } else {
        z = q * p.w1;
    }
    const Matrix logits = decode_logits(z);

    LossBreakdown loss;
    loss.reconstruction = reconstruction_loss_logits(logits, target_, pos_weight_);
    if (variational_) loss.kl = kl_divergence(mu, log_sigma);
    loss.total = loss.reconstruction + kl_scale_ * loss.kl;
    if (!grads) return loss;

    // d(recon)/d(logits)
    Matrix dl(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const double t = target_(r, c), l = logits(r, c);
            dl(r, c) = -pos_weight_ * t * sigmoid(-l) + (1.0 - t) * sigmoid(l);
        }
    }
    dl /= n * n;
    const Matrix dz = (dl + dl.transpose()) * z;

    Matrix dq;
    if (variational_) {
        const Matrix sigma = log_sigma.array().exp().matrix();
        const Matrix dmu = dz + kl_scale_ * mu;
        const Matrix dls = (dz.array() * sigma.array() * noise->array()).matrix() +
                           kl_scale_ * ((2.0 * log_sigma.array()).exp() - 1.0).matrix();
        grads->w_mu = q.transpose() * dmu;
        grads->w_log_sigma = q.transpose() * dls;
        grads->w1 = Matrix::Zero(p.w1.rows(), p.w1.cols());
        dq = dmu * p.w_mu.transpose() + dls * p.w_log_sigma.transpose();
    } else {
        grads->w1 = q.transpose() * dz;
        grads->w_mu = Matrix::Zero(p.w_mu.rows(), p.w_mu.cols());
        grads->w_log_sigma = Matrix::Zero(p.w_log_sigma.rows(), p.w_log_sigma.cols());
        dq = dz * p.w1.transpose();
    }
    const Matrix dhidden = a_norm_.transpose() * dq;
    const Matrix dpre = (dhidden.array() * (pre.array() > 0.0).cast<double>()).matrix();
    grads->w0 = ax_.transpose() * dpre;
    return loss;
}

GaeInputs make_gae_inputs(std::size_t n, const std::vector<Edge>& train_edges, const GaeConfig& cfg,
                          const std::vector<double>* edge_weights) {
    if (train_edges.empty()) throw Error("graph autoencoder: training edge set is empty");
    const AdjacencyOptions opt{.add_self_loops = true, .symmetrize = true};
    GaeInputs in;
    const Matrix weighted =
        adjacency_matrix(n, train_edges, opt, cfg.parallel_edge_weights ? edge_weights : nullptr);
    in.a_norm = normalize_adjacency(weighted);
    in.target = adjacency_matrix(n, train_edges, opt);
    const double ones = in.target.sum();
    const double zeros = static_cast<double>(in.target.size()) - ones;
    in.pos_weight = cfg.pos_weight > 0 ? cfg.pos_weight : zeros / ones;
    return in;
}

GraphAEModel train_graph_autoencoder(const Matrix& x, std::size_t n, const std::vector<Edge>& train_edges,
                                     const GaeConfig& cfg, const std::vector<double>* edge_weights) {
    cfg.validate();
    if (static_cast<std::size_t>(x.rows()) != n) throw Error("graph autoencoder: feature rows do not match vertex count");
    if (!x.allFinite()) throw Error("graph autoencoder: features contain non-finite values");
    GaeInputs in = make_gae_inputs(n, train_edges, cfg, edge_weights);
    const double nn = static_cast<double>(n);
    const GaeObjective objective(x, in.a_norm, in.target, in.pos_weight, cfg.variational, 1.0 / (nn * nn));

    GraphAEModel model;
    model.config = cfg;
    model.a_norm = std::move(in.a_norm);
    model.pos_weight = in.pos_weight;
    model.params = GcnParams::init(x.cols(), cfg);

    auto params = model.params.active(cfg.variational);
    std::vector<Matrix> m1, m2;
    for (const Matrix* p : params) {
        m1.push_back(Matrix::Zero(p->rows(), p->cols()));
        m2.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    Rng noise_rng(mix_seed(cfg.seed, 23));
    GcnParams grads;
    Matrix noise;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.variational) noise = standard_normal_matrix(x.rows(), cfg.hidden2, noise_rng);
        const LossBreakdown loss = objective.evaluate(model.params, cfg.variational ? &noise : nullptr, &grads);
        if (!std::isfinite(loss.total)) {
            throw Error("graph autoencoder: non-finite loss at epoch " + std::to_string(epoch + 1));
        }
        model.history.push_back({epoch + 1, loss.total, loss.reconstruction, loss.kl});

        const auto g = grads.active(cfg.variational);
        const double t = static_cast<double>(epoch + 1);
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
        for (std::size_t k = 0; k < params.size(); ++k) {
            m1[k] = cfg.adam_beta1 * m1[k] + (1.0 - cfg.adam_beta1) * *g[k];
            m2[k] = cfg.adam_beta2 * m2[k] + (1.0 - cfg.adam_beta2) * g[k]->cwiseProduct(*g[k]);
            *params[k] -= (cfg.learning_rate * (m1[k] / c1).array() / ((m2[k] / c2).array().sqrt() + cfg.adam_eps)).matrix();
        }
    }
    return model;
}

GraphAEModel train_graph_autoencoder(const Matrix& x, const ConceptGraph& g, const GaeConfig& cfg) {
    return train_graph_autoencoder(x, g.size(), g.edges(), cfg);
}

Prediction predict_links(const GraphAEModel& model, const Matrix& x, const Matrix& a_norm,
                         const std::vector<Edge>& pairs, double threshold) {
    const LatentState s = gcn_encode(x, a_norm, model.params, model.config.variational, nullptr);
    const auto n = s.z.rows();
    Prediction p;
    for (const auto& [u, v] : pairs) {
        if (u < 0 || v < 0 || u >= n || v >= n) {
            throw Error("predict_links: pair (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
        }
        const double score = sigmoid(s.z.row(u).dot(s.z.row(v)));
        p.scores.push_back(score);
        p.labels.push_back(score >= threshold ? 1 : 0);
    }
    return p;
}

Json gae_to_json(const GraphAEModel& m) {
    Json history = Json::array();
    for (const auto& h : m.history) history.push_back({h.epoch, h.loss, h.reconstruction, h.kl});
    Json p{{"config", m.config},
           {"pos_weight", m.pos_weight},
           {"a_norm", matrix_to_json(m.a_norm)},
           {"w0", matrix_to_json(m.params.w0)},
           {"w1", matrix_to_json(m.params.w1)},
           {"w_mu", matrix_to_json(m.params.w_mu)},
           {"w_log_sigma", matrix_to_json(m.params.w_log_sigma)},
           {"history", history}};
    return make_checkpoint("graph_autoencoder", std::move(p));
}

GraphAEModel gae_from_json(const Json& j) {
    const Json& p = open_checkpoint(j, "graph_autoencoder");
    GraphAEModel m;
    m.config = p.at("config").get<GaeConfig>();
    m.pos_weight = p.at("pos_weight").get<double>();
    m.a_norm = matrix_from_json(p.at("a_norm"));
    m.params.w0 = matrix_from_json(p.at("w0"));
    m.params.w1 = matrix_from_json(p.at("w1"));
    m.params.w_mu = matrix_from_json(p.at("w_mu"));
    m.params.w_log_sigma = matrix_from_json(p.at("w_log_sigma"));
    for (const auto& h : p.at("history")) {
        m.history.push_back({h[0].get<int>(), h[1].get<double>(), h[2].get<double>(), h[3].get<double>()});
    }
    return m;
}

void write_training_log(std::ostream& out, const GraphAEModel& m) {
    for (const auto& h : m.history) {
        out << Json{{"epoch", h.epoch}, {"loss", h.loss}, {"recon", h.reconstruction}, {"kl", h.kl}}.dump() << '\n';
    }
}

}  // namespace prereq
