#include "prereq/embed.hpp"

#include <algorithm>
#include <map>

namespace prereq {

void EmbedConfig::validate() const {
    if (dim <= 0) throw Error("embed config: dim must be positive");
    if (window <= 0) throw Error("embed config: window must be positive");
    if (epochs <= 0) throw Error("embed config: epochs must be positive");
    if (negative_samples < 0) throw Error("embed config: negative_samples must be non-negative");
    if (!(learning_rate > 0)) throw Error("embed config: learning_rate must be positive");
    if (min_count < 0) throw Error("embed config: min_count must be non-negative");
    if (infer_steps < 0) throw Error("embed config: infer_steps must be non-negative");
}

void to_json(Json& j, const EmbedConfig& c) {
    j = Json{{"dim", c.dim},
             {"window", c.window},
             {"epochs", c.epochs},
             {"negative_samples", c.negative_samples},
             {"learning_rate", c.learning_rate},
             {"min_learning_rate_fraction", c.min_learning_rate_fraction},
             {"min_count", c.min_count},
             {"infer_steps", c.infer_steps},
             {"seed", c.seed},
             {"train_word_vectors", c.train_word_vectors},
             {"train_output_weights", c.train_output_weights}};
}

void from_json(const Json& j, EmbedConfig& c) {
    const EmbedConfig d;
    c.dim = j.value("dim", d.dim);
    c.window = j.value("window", d.window);
    c.epochs = j.value("epochs", d.epochs);
    c.negative_samples = j.value("negative_samples", d.negative_samples);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.min_learning_rate_fraction = j.value("min_learning_rate_fraction", d.min_learning_rate_fraction);
    c.min_count = j.value("min_count", d.min_count);
    c.infer_steps = j.value("infer_steps", d.infer_steps);
    c.seed = j.value("seed", d.seed);
    c.train_word_vectors = j.value("train_word_vectors", d.train_word_vectors);
    c.train_output_weights = j.value("train_output_weights", d.train_output_weights);
}

// ---------------------------------------------------------------------------
// Vocab

Vocab Vocab::build(const DocumentSet& set, int min_count) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& d : set.documents()) {
        for (const auto& t : d.tokens) ++counts[t];
    }
    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (auto& [tok, n] : counts) {
        if (n >= min_count) kept.emplace_back(tok, n);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (auto& [tok, n] : kept) {
        v.tokens_.push_back(tok);
        v.counts_.push_back(n);
    }
    v.reindex();
    return v;
}

void Vocab::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

std::optional<int> Vocab::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (auto i = find(t)) out.push_back(*i);
    }
    return out;
}

Json Vocab::to_json() const {
    return Json{{"tokens", tokens_}, {"counts", counts_}};
}

Vocab Vocab::from_json(const Json& j) {
    Vocab v;
    v.tokens_ = j.at("tokens").get<std::vector<std::string>>();
    v.counts_ = j.at("counts").get<std::vector<std::int64_t>>();
    if (v.tokens_.size() != v.counts_.size()) throw Error("vocab json: tokens/counts length mismatch");
    v.reindex();
    return v;
}

NoiseSampler::NoiseSampler(const Vocab& vocab) {
    cdf_.reserve(vocab.size());
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        total += std::pow(static_cast<double>(vocab.count(static_cast<int>(i))), 0.75);
        cdf_.push_back(total);
    }
    for (double& c : cdf_) c /= total;
}

int NoiseSampler::sample(Rng& rng) const {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<int>(it - cdf_.begin());
}

// ---------------------------------------------------------------------------
// Loss and gradient

namespace {

Vector context_mean(const PvdmModel& m, const Eigen::Ref<const Vector>& doc, const std::vector<int>& context) {
    Vector h = doc;
    for (int c : context) h += m.word_vectors.row(c).transpose();
    return h / static_cast<double>(1 + context.size());
}

struct Workspace {
    Vector h;
    Vector grad_h;
};

/// In-place SGD step on one example. `doc` is the document row being trained;
/// word/output rows are only written through the non-null mutable pointers.
double sgd_step(const Matrix& words, const Matrix& out, Matrix* words_mut, Matrix* out_mut, Eigen::Ref<Vector> doc,
                const std::vector<int>& context, int target, const std::vector<int>& negatives, double alpha,
                Workspace& ws) {
    const double cw = static_cast<double>(1 + context.size());
    ws.h = doc;
    for (int c : context) ws.h += words.row(c).transpose();
    ws.h /= cw;
    ws.grad_h.setZero(ws.h.size());

    double loss = 0.0;
    auto score = [&](int u, double label) {
        const double s = out.row(u).dot(ws.h);
        loss += label > 0 ? softplus(-s) : softplus(s);
        const double g = sigmoid(s) - label;
        ws.grad_h += g * out.row(u).transpose();
        if (out_mut) out_mut->row(u) -= alpha * g * ws.h.transpose();
    };
    score(target, 1.0);
    for (int n : negatives) score(n, 0.0);

    ws.grad_h /= cw;
    doc -= alpha * ws.grad_h;
    if (words_mut) {
        for (int c : context) words_mut->row(c) -= alpha * ws.grad_h.transpose();
    }
    return loss;
}

void draw_negatives(const NoiseSampler& noise, int k, int target, Rng& rng, std::vector<int>& out) {
    out.clear();
    for (int i = 0; i < k; ++i) {
        const int n = noise.sample(rng);
        if (n != target) out.push_back(n);
    }
}

void window_context(const std::vector<int>& seq, std::size_t t, int window, std::vector<int>& out) {
    out.clear();
    const std::size_t lo = t >= static_cast<std::size_t>(window) ? t - static_cast<std::size_t>(window) : 0;
    const std::size_t hi = std::min(seq.size(), t + static_cast<std::size_t>(window) + 1);
    for (std::size_t i = lo; i < hi; ++i) {
        if (i != t) out.push_back(seq[i]);
    }
}

double epoch_alpha(const EmbedConfig& cfg, int epoch, int epochs) {
    const double frac = static_cast<double>(epoch) / static_cast<double>(epochs);
    return cfg.learning_rate * (1.0 - (1.0 - cfg.min_learning_rate_fraction) * frac);
}

Vector uniform_init(int dim, Rng& rng) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = (uniform01(rng) - 0.5) / dim;
    return v;
}

}  // namespace

PvdmGradient pvdm_example_gradient(const PvdmModel& m, const PvdmExample& ex) {
    const double cw = static_cast<double>(1 + ex.context.size());
    const Vector h = context_mean(m, m.doc_vectors.row(ex.doc).transpose(), ex.context);
    PvdmGradient g;
    g.loss = 0.0;
    Vector grad_h = Vector::Zero(h.size());

    const double st = m.output_weights.row(ex.target).dot(h);
    g.loss += softplus(-st);
    const double gt = sigmoid(st) - 1.0;
    grad_h += gt * m.output_weights.row(ex.target).transpose();
    g.target_out = gt * h;

    for (int n : ex.negatives) {
        const double s = m.output_weights.row(n).dot(h);
        g.loss += softplus(s);
        const double gn = sigmoid(s);
        grad_h += gn * m.output_weights.row(n).transpose();
        g.negative_out.push_back(gn * h);
    }
    g.doc = grad_h / cw;
    g.context.assign(ex.context.size(), g.doc);
    return g;
}

double pvdm_example_loss(const PvdmModel& m, const PvdmExample& ex) {
    const Vector h = context_mean(m, m.doc_vectors.row(ex.doc).transpose(), ex.context);
    double loss = softplus(-m.output_weights.row(ex.target).dot(h));
    for (int n : ex.negatives) loss += softplus(m.output_weights.row(n).dot(h));
    return loss;
}

// ---------------------------------------------------------------------------
// Training and inference

PvdmModel train_pvdm(const DocumentSet& set, const EmbedConfig& cfg, const PvdmInit& init) {
    cfg.validate();
    if (set.empty()) throw Error("train_pvdm: empty document set");

    PvdmModel m;
    m.config = cfg;
    m.provenance = std::string(to_string(set.provenance()));
    m.vocab = Vocab::build(set, cfg.min_count);
    if (m.vocab.size() == 0) {
        throw Error("train_pvdm: vocabulary is empty after min_count=" + std::to_string(cfg.min_count) + " filtering");
    }
    const auto V = static_cast<Eigen::Index>(m.vocab.size());
    const auto D = static_cast<Eigen::Index>(set.size());
    const int dim = cfg.dim;

    Rng init_rng(mix_seed(cfg.seed, 1));
    m.word_vectors.resize(V, dim);
    for (Eigen::Index r = 0; r < V; ++r) m.word_vectors.row(r) = uniform_init(dim, init_rng).transpose();
    m.doc_vectors.resize(D, dim);
    for (Eigen::Index r = 0; r < D; ++r) m.doc_vectors.row(r) = uniform_init(dim, init_rng).transpose();
    m.output_weights = Matrix::Zero(V, dim);

    auto check_shape = [](const Matrix& given, Eigen::Index rows, int cols, const char* what) {
        if (given.rows() != rows || given.cols() != cols) {
            throw Error(std::string("train_pvdm: initial ") + what + " has wrong shape");
        }
    };
    if (init.word_vectors) {
        check_shape(*init.word_vectors, V, dim, "word_vectors");
        m.word_vectors = *init.word_vectors;
    }
    if (init.doc_vectors) {
        check_shape(*init.doc_vectors, D, dim, "doc_vectors");
        m.doc_vectors = *init.doc_vectors;
    }
    if (init.output_weights) {
        check_shape(*init.output_weights, V, dim, "output_weights");
        m.output_weights = *init.output_weights;
    }

    std::vector<std::vector<int>> encoded;
    encoded.reserve(set.size());
    for (const auto& d : set.documents()) {
        m.doc_ids.push_back(d.id);
        encoded.push_back(m.vocab.encode(d.tokens));
    }

    const NoiseSampler noise(m.vocab);
    Rng rng(mix_seed(cfg.seed, 2));
    Workspace ws;
    std::vector<int> context, negatives;
    Vector doc(dim);
    Matrix* words_mut = cfg.train_word_vectors ? &m.word_vectors : nullptr;
    Matrix* out_mut = cfg.train_output_weights ? &m.output_weights : nullptr;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double alpha = epoch_alpha(cfg, epoch, cfg.epochs);
        double loss = 0.0;
        for (std::size_t di = 0; di < encoded.size(); ++di) {
            const auto& seq = encoded[di];
            auto row = m.doc_vectors.row(static_cast<Eigen::Index>(di));
            doc = row.transpose();
            for (std::size_t t = 0; t < seq.size(); ++t) {
                window_context(seq, t, cfg.window, context);
                draw_negatives(noise, cfg.negative_samples, seq[t], rng, negatives);
                loss += sgd_step(m.word_vectors, m.output_weights, words_mut, out_mut, doc, context, seq[t],
                                 negatives, alpha, ws);
            }
            row = doc.transpose();
        }
        if (!std::isfinite(loss)) {
            throw Error("train_pvdm: non-finite loss at epoch " + std::to_string(epoch));
        }
        m.epoch_loss.push_back(loss);
    }
    return m;
}

Vector infer_embedding(const PvdmModel& model, const std::vector<std::string>& tokens, int steps, double lr,
                       std::uint64_t seed, const std::string& label) {
    if (steps < 0) throw Error("infer_embedding: steps must be non-negative");
    if (!(lr > 0)) throw Error("infer_embedding: learning rate must be positive");
    const std::vector<int> seq = model.vocab.encode(tokens);
    if (seq.empty()) throw Error("infer_embedding: no in-vocabulary tokens for concept '" + label + "'");

    Rng rng(mix_seed(seed, 3));
    Vector doc = uniform_init(model.dim(), rng);
    if (steps == 0) return doc;

    const NoiseSampler noise(model.vocab);
    Workspace ws;
    std::vector<int> context, negatives;
    EmbedConfig sched = model.config;
    sched.learning_rate = lr;
    for (int step = 0; step < steps; ++step) {
        const double alpha = epoch_alpha(sched, step, steps);
        for (std::size_t t = 0; t < seq.size(); ++t) {
            window_context(seq, t, model.config.window, context);
            draw_negatives(noise, model.config.negative_samples, seq[t], rng, negatives);
            sgd_step(model.word_vectors, model.output_weights, nullptr, nullptr, doc, context, seq[t], negatives, alpha,
                     ws);
        }
    }
    return doc;
}

Json EmbeddingMatrix::to_json() const {
    return make_checkpoint("embedding_matrix", Json{{"concepts", concepts}, {"x", matrix_to_json(x)}});
}

EmbeddingMatrix EmbeddingMatrix::from_json(const Json& j) {
    const Json& p = open_checkpoint(j, "embedding_matrix");
    EmbeddingMatrix e;
    e.concepts = p.at("concepts").get<std::vector<std::string>>();
    e.x = matrix_from_json(p.at("x"));
    if (static_cast<Eigen::Index>(e.concepts.size()) != e.x.rows()) {
        throw Error("embedding matrix: concept count does not match row count");
    }
    return e;
}

EmbeddingMatrix build_concept_matrix(const PvdmModel& model, const std::vector<std::string>& concepts,
                                     const TokenizeConfig& tok) {
    EmbeddingMatrix e;
    e.concepts = concepts;
    e.x.resize(static_cast<Eigen::Index>(concepts.size()), model.dim());
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        const Vector v = infer_embedding(model, tokenize(concepts[i], tok), model.config.infer_steps,
                                         model.config.learning_rate, model.config.seed, concepts[i]);
        e.x.row(static_cast<Eigen::Index>(i)) = v.transpose();
    }
    return e;
}

Json pvdm_to_json(const PvdmModel& m) {
    Json p{{"config", m.config},
           {"vocab", m.vocab.to_json()},
           {"doc_ids", m.doc_ids},
           {"provenance", m.provenance},
           {"epoch_loss", m.epoch_loss},
           {"word_vectors", matrix_to_json(m.word_vectors)},
           {"doc_vectors", matrix_to_json(m.doc_vectors)},
           {"output_weights", matrix_to_json(m.output_weights)}};
    return make_checkpoint("pvdm", std::move(p));
}

PvdmModel pvdm_from_json(const Json& j) {
    const Json& p = open_checkpoint(j, "pvdm");
    PvdmModel m;
    m.config = p.at("config").get<EmbedConfig>();
    m.vocab = Vocab::from_json(p.at("vocab"));
    m.doc_ids = p.at("doc_ids").get<std::vector<std::string>>();
    m.provenance = p.value("provenance", std::string());
    m.epoch_loss = p.value("epoch_loss", std::vector<double>{});
    m.word_vectors = matrix_from_json(p.at("word_vectors"));
    m.doc_vectors = matrix_from_json(p.at("doc_vectors"));
    m.output_weights = matrix_from_json(p.at("output_weights"));
    const auto V = static_cast<Eigen::Index>(m.vocab.size());
    if (m.word_vectors.rows() != V || m.output_weights.rows() != V ||
        m.doc_vectors.rows() != static_cast<Eigen::Index>(m.doc_ids.size()) || m.word_vectors.cols() != m.dim() ||
        m.doc_vectors.cols() != m.dim() || m.output_weights.cols() != m.dim()) {
        throw Error("pvdm checkpoint: matrix shapes inconsistent with config/vocab");
    }
    return m;
}

}  // namespace prereq
