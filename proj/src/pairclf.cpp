#include "prereq/pairclf.hpp"

#include <algorithm>
#include <numeric>

namespace prereq {

std::size_t PairDataset::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

PairDataset PairDataset::subset(const std::vector<std::size_t>& rows) const {
    PairDataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.pairs.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        if (i >= size()) throw Error("PairDataset::subset: row out of range");
        out.pairs.push_back(pairs[i]);
        out.labels.push_back(labels[i]);
        out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(i));
    }
    return out;
}

Vector pair_features(const Matrix& x, int src, int tgt) {
    Vector f(2 * x.cols());
    f << x.row(src).transpose(), x.row(tgt).transpose();
    return f;
}

PairDataset make_pairs(const Matrix& x, const std::vector<Edge>& pairs, const std::vector<int>& labels) {
    if (pairs.size() != labels.size()) throw Error("make_pairs: pairs/labels length mismatch");
    PairDataset ds;
    ds.pairs = pairs;
    ds.labels = labels;
    const Eigen::Index d = x.cols();
    ds.features.resize(static_cast<Eigen::Index>(pairs.size()), 2 * d);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto [u, v] = pairs[r];
        if (u < 0 || v < 0 || u >= x.rows() || v >= x.rows()) throw Error("make_pairs: concept index out of range");
        ds.features.row(static_cast<Eigen::Index>(r)) << x.row(u), x.row(v);
    }
    return ds;
}

PairDataset build_pair_dataset(const EmbeddingMatrix& x, const ConceptGraph& g) {
    if (x.x.rows() != static_cast<Eigen::Index>(g.size()) || x.concepts.size() != g.size()) {
        throw Error("build_pair_dataset: embedding has " + std::to_string(x.x.rows()) + " rows but graph has " +
                    std::to_string(g.size()) + " concepts");
    }
    const int n = static_cast<int>(g.size());
    std::vector<Edge> pairs;
    std::vector<int> labels;
    pairs.reserve(g.size() * (g.size() > 0 ? g.size() - 1 : 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            pairs.emplace_back(i, j);
            labels.push_back(g.has_edge(i, j) ? 1 : 0);
        }
    }
    return make_pairs(x.x, pairs, labels);
}

PairDataset oversample(const PairDataset& ds, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ds.size(); ++i) (ds.labels[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw Error("oversample: training data contains a single class");
    Rng rng(mix_seed(seed, 11));
    std::vector<std::size_t> rows;
    rows.reserve(std::max(pos.size(), neg.size()) * 2);
    rows.insert(rows.end(), pos.begin(), pos.end());
    rows.insert(rows.end(), neg.begin(), neg.end());
    for (std::size_t extra = pos.size(); extra < neg.size(); ++extra) rows.push_back(pos[uniform_index(rng, pos.size())]);
    shuffle(rows, rng);
    return ds.subset(rows);
}

std::string_view to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::NaiveBayes: return "nb";
        case ClassifierKind::LinearSvm: return "svm";
        case ClassifierKind::LogisticRegression: return "lr";
        case ClassifierKind::RandomForest: return "rf";
    }
    return "svm";
}

ClassifierKind parse_classifier_kind(std::string_view s) {
    const std::string f = casefold(s);
    if (f == "nb" || f == "naive_bayes") return ClassifierKind::NaiveBayes;
    if (f == "svm" || f == "linear_svm") return ClassifierKind::LinearSvm;
    if (f == "lr" || f == "logistic_regression") return ClassifierKind::LogisticRegression;
    if (f == "rf" || f == "random_forest") return ClassifierKind::RandomForest;
    throw Error("unknown classifier '" + std::string(s) + "'");
}

void to_json(Json& j, const ClassifierHyper& h) {
    j = Json{{"l2", h.l2},           {"epochs", h.epochs},     {"learning_rate", h.learning_rate},
             {"standardize", h.standardize}, {"trees", h.trees}, {"max_depth", h.max_depth},
             {"min_leaf", h.min_leaf}, {"bootstrap", h.bootstrap}, {"variance_floor", h.variance_floor}};
}

void from_json(const Json& j, ClassifierHyper& h) {
    const ClassifierHyper d;
    h.l2 = j.value("l2", d.l2);
    h.epochs = j.value("epochs", d.epochs);
    h.learning_rate = j.value("learning_rate", d.learning_rate);
    h.standardize = j.value("standardize", d.standardize);
    h.trees = j.value("trees", d.trees);
    h.max_depth = j.value("max_depth", d.max_depth);
    h.min_leaf = j.value("min_leaf", d.min_leaf);
    h.bootstrap = j.value("bootstrap", d.bootstrap);
    h.variance_floor = j.value("variance_floor", d.variance_floor);
}

namespace {

void check_features(const Matrix& x, const char* who) {
    if (!x.allFinite()) throw Error(std::string(who) + ": features contain non-finite values");
}

void check_two_classes(const std::vector<int>& y, const char* who) {
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == static_cast<long>(y.size())) throw Error(std::string(who) + ": training data needs both classes");
}

Vector json_vector(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) {
    return {v.data(), v.data() + v.size()};
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

class NaiveBayes final : public PairClassifier {
public:
    Vector mean[2], var[2];
    double log_prior[2] = {0, 0};

    ClassifierKind kind() const override { return ClassifierKind::NaiveBayes; }
    std::size_t width() const override { return static_cast<std::size_t>(mean[0].size()); }

    Vector decision(const Matrix& x) const override {
        Vector out(x.rows());
        Vector ll[2];
        for (int c = 0; c < 2; ++c) {
            const Vector inv = var[c].cwiseInverse();
            const double norm = -0.5 * (var[c].array() * 6.283185307179586).log().sum();
            ll[c] = (x.rowwise() - mean[c].transpose()).array().square().matrix() * inv * -0.5;
            ll[c].array() += norm + log_prior[c];
        }
        for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = sigmoid(ll[1](r) - ll[0](r));
        return out;
    }

    Json to_json() const override {
        return Json{{"kind", "nb"},
                    {"mean0", to_std(mean[0])}, {"mean1", to_std(mean[1])},
                    {"var0", to_std(var[0])},   {"var1", to_std(var[1])},
                    {"log_prior0", log_prior[0]}, {"log_prior1", log_prior[1]}};
    }

    static std::unique_ptr<NaiveBayes> train(const PairDataset& ds, const ClassifierHyper& h) {
        auto m = std::make_unique<NaiveBayes>();
        const Eigen::Index p = ds.features.cols();
        double count[2] = {0, 0};
        for (int c = 0; c < 2; ++c) {
            m->mean[c] = Vector::Zero(p);
            m->var[c] = Vector::Zero(p);
        }
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const int c = ds.labels[i] ? 1 : 0;
            m->mean[c] += ds.features.row(static_cast<Eigen::Index>(i)).transpose();
            count[c] += 1;
        }
        for (int c = 0; c < 2; ++c) m->mean[c] /= count[c];
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const int c = ds.labels[i] ? 1 : 0;
            m->var[c] += (ds.features.row(static_cast<Eigen::Index>(i)).transpose() - m->mean[c]).array().square().matrix();
        }
        const double total = count[0] + count[1];
        for (int c = 0; c < 2; ++c) {
            m->var[c] = (m->var[c] / count[c]).cwiseMax(h.variance_floor);
            m->log_prior[c] = std::log(count[c] / total);
        }
        return m;
    }

    static std::unique_ptr<NaiveBayes> load(const Json& j) {
        auto m = std::make_unique<NaiveBayes>();
        m->mean[0] = json_vector(j.at("mean0"));
        m->mean[1] = json_vector(j.at("mean1"));
        m->var[0] = json_vector(j.at("var0"));
        m->var[1] = json_vector(j.at("var1"));
        m->log_prior[0] = j.at("log_prior0").get<double>();
        m->log_prior[1] = j.at("log_prior1").get<double>();
        return m;
    }
};

// ---------------------------------------------------------------------------
// Linear models share standardization and the (w, b) parameterization.

struct Standardizer {
    Vector mean, scale;

    static Standardizer fit(const Matrix& x, bool enabled) {
        Standardizer s;
        const Eigen::Index p = x.cols();
        if (!enabled) {
            s.mean = Vector::Zero(p);
            s.scale = Vector::Ones(p);
            return s;
        }
        s.mean = x.colwise().mean().transpose();
        s.scale = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / static_cast<double>(x.rows()))
                      .sqrt()
                      .transpose();
        for (Eigen::Index i = 0; i < p; ++i) {
            if (!(s.scale(i) > 1e-12)) s.scale(i) = 1.0;
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
};

/// Largest eigenvalue of X^T X / m by power iteration (deterministic start).
double gram_spectral_norm(const Matrix& x) {
    Vector v = Vector::Ones(x.cols()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
        Vector w = x.transpose() * (x * v) / static_cast<double>(x.rows());
        const double norm = w.norm();
        if (norm <= 0) return 0.0;
        v = w / norm;
        if (std::abs(norm - lambda) <= 1e-9 * norm) {
            lambda = norm;
            break;
        }
        lambda = norm;
    }
    return lambda;
}

class LinearModel : public PairClassifier {
public:
    Standardizer standardizer;
    Vector w;
    double b = 0.0;

    std::size_t width() const override { return static_cast<std::size_t>(w.size()); }

    Vector margin(const Matrix& x) const {
        Vector m = standardizer.apply(x) * w;
        m.array() += b;
        return m;
    }

    Json linear_json(const char* kind) const {
        return Json{{"kind", kind}, {"mean", to_std(standardizer.mean)}, {"scale", to_std(standardizer.scale)},
                    {"w", to_std(w)}, {"b", b}};
    }

    void load_linear(const Json& j) {
        standardizer.mean = json_vector(j.at("mean"));
        standardizer.scale = json_vector(j.at("scale"));
        w = json_vector(j.at("w"));
        b = j.at("b").get<double>();
    }
};

class LogisticRegression final : public LinearModel {
public:
    ClassifierKind kind() const override { return ClassifierKind::LogisticRegression; }
    Vector decision(const Matrix& x) const override { return margin(x).unaryExpr([](double v) { return sigmoid(v); }); }
    Json to_json() const override { return linear_json("lr"); }

    static std::unique_ptr<LogisticRegression> train(const PairDataset& ds, const ClassifierHyper& h) {
        auto m = std::make_unique<LogisticRegression>();
        m->standardizer = Standardizer::fit(ds.features, h.standardize);
        const Matrix z = m->standardizer.apply(ds.features);
        m->w = Vector::Zero(z.cols());
        // Full-batch gradient descent; learning_rate scales the 1/L step of the smooth loss.
        const double lipschitz = 0.25 * (gram_spectral_norm(z) + 1.0) + h.l2;
        const double step = h.learning_rate / lipschitz;
        for (int e = 0; e < h.epochs; ++e) {
            const auto g = logistic_loss_grad(z, ds.labels, m->w, m->b, h.l2);
            m->w -= step * g.grad_w;
            m->b -= step * g.grad_b;
        }
        return m;
    }
};

class LinearSvm final : public LinearModel {
public:
    ClassifierKind kind() const override { return ClassifierKind::LinearSvm; }
    Vector decision(const Matrix& x) const override { return margin(x); }
    double threshold() const override { return 0.0; }
    Json to_json() const override { return linear_json("svm"); }

    static double objective(const Matrix& z, const Vector& ys, const Vector& w, double b, double l2) {
        Vector m = z * w;
        m.array() += b;
        const double hinge = (1.0 - ys.array() * m.array()).max(0.0).mean();
        return hinge + 0.5 * l2 * w.squaredNorm();
    }

    static std::unique_ptr<LinearSvm> train(const PairDataset& ds, const ClassifierHyper& h) {
        auto m = std::make_unique<LinearSvm>();
        m->standardizer = Standardizer::fit(ds.features, h.standardize);
        const Matrix z = m->standardizer.apply(ds.features);
        const auto rows = z.rows();
        Vector ys(rows);
        for (Eigen::Index i = 0; i < rows; ++i) ys(i) = ds.labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;

        Vector w = Vector::Zero(z.cols());
        double b = 0.0;
        Vector best_w = w;
        double best_b = b, best_obj = objective(z, ys, w, b, h.l2);
        // Subgradient descent with a 1/sqrt(t) schedule; the best iterate is kept
        // since subgradient steps are not monotone.
        const double base = h.learning_rate / std::sqrt(gram_spectral_norm(z) + 1.0);
        for (int e = 0; e < h.epochs; ++e) {
            Vector mg = z * w;
            mg.array() += b;
            Vector coef = Vector::Zero(rows);
            for (Eigen::Index i = 0; i < rows; ++i) {
                if (ys(i) * mg(i) < 1.0) coef(i) = -ys(i);
            }
            const Vector gw = z.transpose() * coef / static_cast<double>(rows) + h.l2 * w;
            const double gb = coef.mean();
            const double step = base / std::sqrt(static_cast<double>(e + 1));
            w -= step * gw;
            b -= step * gb;
            const double obj = objective(z, ys, w, b, h.l2);
            if (obj < best_obj) {
                best_obj = obj;
                best_w = w;
                best_b = b;
            }
        }
        m->w = best_w;
        m->b = best_b;
        return m;
    }
};

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;  // positive fraction at the leaf
};

double gini(double pos, double total) {
    if (total <= 0) return 0.0;
    const double p = pos / total;
    return 2.0 * p * (1.0 - p);
}

class RandomForest final : public PairClassifier {
public:
    std::vector<std::vector<TreeNode>> trees;
    std::size_t feature_count = 0;

    ClassifierKind kind() const override { return ClassifierKind::RandomForest; }
    std::size_t width() const override { return feature_count; }

    Vector decision(const Matrix& x) const override {
        Vector out = Vector::Zero(x.rows());
        for (const auto& t : trees) {
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                int node = 0;
                while (t[static_cast<std::size_t>(node)].feature >= 0) {
                    const auto& nd = t[static_cast<std::size_t>(node)];
                    node = x(r, nd.feature) <= nd.threshold ? nd.left : nd.right;
                }
                out(r) += t[static_cast<std::size_t>(node)].value > 0.5 ? 1.0 : 0.0;
            }
        }
        return out / static_cast<double>(std::max<std::size_t>(1, trees.size()));
    }

    Json to_json() const override {
        Json ts = Json::array();
        for (const auto& t : trees) {
            Json nodes = Json::array();
            for (const auto& n : t) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            ts.push_back(std::move(nodes));
        }
        return Json{{"kind", "rf"}, {"feature_count", feature_count}, {"trees", std::move(ts)}};
    }

    static std::unique_ptr<RandomForest> load(const Json& j) {
        auto m = std::make_unique<RandomForest>();
        m->feature_count = j.at("feature_count").get<std::size_t>();
        for (const auto& t : j.at("trees")) {
            std::vector<TreeNode> nodes;
            for (const auto& n : t) {
                nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>()});
            }
            m->trees.push_back(std::move(nodes));
        }
        return m;
    }

    static std::vector<TreeNode> grow(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t> rows,
                                      const ClassifierHyper& h, Rng& rng) {
        const int p = static_cast<int>(x.cols());
        const int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p))));
        std::vector<int> all_features(static_cast<std::size_t>(p));
        std::iota(all_features.begin(), all_features.end(), 0);

        std::vector<TreeNode> nodes;
        struct Task {
            int node;
            std::vector<std::size_t> rows;
            int depth;
        };
        std::vector<Task> stack;
        nodes.emplace_back();
        stack.push_back({0, std::move(rows), 0});
        const auto min_leaf = static_cast<std::size_t>(std::max(1, h.min_leaf));
        while (!stack.empty()) {
            Task task = std::move(stack.back());
            stack.pop_back();
            double pos = 0;
            for (auto r : task.rows) pos += y[r];
            const double total = static_cast<double>(task.rows.size());
            nodes[static_cast<std::size_t>(task.node)].value = total > 0 ? pos / total : 0.0;
            const bool pure = pos == 0 || pos == total;
            if (pure || task.rows.size() < 2 * min_leaf || (h.max_depth > 0 && task.depth >= h.max_depth)) continue;

            // Partial Fisher-Yates for the candidate features.
            for (int k = 0; k < mtry; ++k) {
                const auto j = static_cast<std::size_t>(k) + uniform_index(rng, static_cast<std::size_t>(p - k));
                std::swap(all_features[static_cast<std::size_t>(k)], all_features[j]);
            }
            const std::vector<int> candidates(all_features.begin(), all_features.begin() + mtry);
            const GiniSplit split = best_gini_split(x, y, task.rows, candidates, min_leaf);
            if (split.feature < 0 || split.impurity >= gini(pos, total) * total - 1e-12) continue;

            std::vector<std::size_t> left, right;
            for (auto r : task.rows) (x(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
            const int l = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes.emplace_back();
            auto& nd = nodes[static_cast<std::size_t>(task.node)];
            nd.feature = split.feature;
            nd.threshold = split.threshold;
            nd.left = l;
            nd.right = l + 1;
            stack.push_back({l + 1, std::move(right), task.depth + 1});
            stack.push_back({l, std::move(left), task.depth + 1});
        }
        return nodes;
    }

    static std::unique_ptr<RandomForest> train(const PairDataset& ds, const ClassifierHyper& h, std::uint64_t seed) {
        auto m = std::make_unique<RandomForest>();
        m->feature_count = static_cast<std::size_t>(ds.features.cols());
        for (int t = 0; t < std::max(1, h.trees); ++t) {
            Rng rng(mix_seed(seed, 100 + static_cast<std::uint64_t>(t)));
            std::vector<std::size_t> rows(ds.size());
            if (h.bootstrap) {
                for (auto& r : rows) r = uniform_index(rng, ds.size());
            } else {
                std::iota(rows.begin(), rows.end(), 0);
            }
            m->trees.push_back(grow(ds.features, ds.labels, std::move(rows), h, rng));
        }
        return m;
    }
};

}  // namespace

LogisticLossGrad logistic_loss_grad(const Matrix& x, const std::vector<int>& y, const Vector& w, double b, double l2) {
    const auto m = x.rows();
    Vector margin = x * w;
    margin.array() += b;
    LogisticLossGrad out;
    Vector resid(m);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double yi = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        loss += yi > 0 ? softplus(-margin(i)) : softplus(margin(i));
        resid(i) = sigmoid(margin(i)) - yi;
    }
    out.loss = loss / static_cast<double>(m) + 0.5 * l2 * w.squaredNorm();
    out.grad_w = x.transpose() * resid / static_cast<double>(m) + l2 * w;
    out.grad_b = resid.mean();
    return out;
}

GiniSplit best_gini_split(const Matrix& x, const std::vector<int>& y, const std::vector<std::size_t>& idx,
                          const std::vector<int>& features, std::size_t min_leaf) {
    GiniSplit best;
    best.impurity = std::numeric_limits<double>::infinity();
    const double total = static_cast<double>(idx.size());
    double total_pos = 0;
    for (auto r : idx) total_pos += y[r];
    std::vector<std::pair<double, int>> vals(idx.size());
    for (int f : features) {
        for (std::size_t k = 0; k < idx.size(); ++k) vals[k] = {x(static_cast<Eigen::Index>(idx[k]), f), y[idx[k]]};
        std::sort(vals.begin(), vals.end());
        double left_pos = 0;
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            left_pos += vals[k].second;
            if (vals[k].first == vals[k + 1].first) continue;
            const double nl = static_cast<double>(k + 1), nr = total - nl;
            if (k + 1 < min_leaf || vals.size() - (k + 1) < min_leaf) continue;
            const double imp = nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr);
            if (imp < best.impurity - 1e-12) {
                best.impurity = imp;
                best.feature = f;
                best.threshold = 0.5 * (vals[k].first + vals[k + 1].first);
            }
        }
    }
    if (best.feature < 0) best.impurity = 0.0;
    return best;
}

std::unique_ptr<PairClassifier> train_classifier(ClassifierKind kind, const PairDataset& ds, const ClassifierHyper& h,
                                                 std::uint64_t seed) {
    check_features(ds.features, "train_classifier");
    check_two_classes(ds.labels, "train_classifier");
    switch (kind) {
        case ClassifierKind::NaiveBayes: return NaiveBayes::train(ds, h);
        case ClassifierKind::LinearSvm: return LinearSvm::train(ds, h);
        case ClassifierKind::LogisticRegression: return LogisticRegression::train(ds, h);
        case ClassifierKind::RandomForest: return RandomForest::train(ds, h, seed);
    }
    throw Error("train_classifier: unsupported kind");
}

Prediction predict_pairs(const PairClassifier& clf, const Matrix& features) {
    if (static_cast<std::size_t>(features.cols()) != clf.width()) {
        throw Error("predict_pairs: feature width " + std::to_string(features.cols()) + " does not match training width " +
                    std::to_string(clf.width()));
    }
    const Vector s = clf.decision(features);
    Prediction p;
    p.scores.assign(s.data(), s.data() + s.size());
    p.labels.reserve(p.scores.size());
    const double t = clf.threshold();
    for (double v : p.scores) p.labels.push_back(clf.kind() == ClassifierKind::LinearSvm ? (v > t) : (v >= t));
    return p;
}

Json classifier_to_json(const PairClassifier& clf) {
    return make_checkpoint("pair_classifier", clf.to_json());
}

std::unique_ptr<PairClassifier> classifier_from_json(const Json& j) {
    const Json& p = open_checkpoint(j, "pair_classifier");
    switch (parse_classifier_kind(p.at("kind").get<std::string>())) {
        case ClassifierKind::NaiveBayes: return NaiveBayes::load(p);
        case ClassifierKind::LinearSvm: {
            auto m = std::make_unique<LinearSvm>();
            m->load_linear(p);
            return m;
        }
        case ClassifierKind::LogisticRegression: {
            auto m = std::make_unique<LogisticRegression>();
            m->load_linear(p);
            return m;
        }
        case ClassifierKind::RandomForest: return RandomForest::load(p);
    }
    throw Error("classifier checkpoint: unsupported kind");
}

}  // namespace prereq
