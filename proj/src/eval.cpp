#include "prereq/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace prereq {

std::vector<FoldSplit> make_folds(const ConceptGraph& g, int k, double test_pos_frac, std::uint64_t seed) {
    if (k <= 0) throw Error("make_folds: k must be positive");
    if (!(test_pos_frac > 0 && test_pos_frac < 1)) throw Error("make_folds: test_pos_frac must be in (0,1)");
    const auto& positives = g.edges();
    const auto m = static_cast<std::size_t>(std::floor(test_pos_frac * static_cast<double>(positives.size())));
    if (m == 0 || m * static_cast<std::size_t>(k) > positives.size()) {
        throw Error("make_folds: " + std::to_string(positives.size()) + " positives are not enough for " +
                    std::to_string(k) + " disjoint folds of " + std::to_string(m));
    }

    std::vector<Edge> negatives;
    const int n = static_cast<int>(g.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && !g.has_edge(i, j)) negatives.emplace_back(i, j);
        }
    }
    if (negatives.size() < m) throw Error("make_folds: not enough negative pairs for the test sets");

    std::vector<std::size_t> perm(positives.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(mix_seed(seed, 31));
    shuffle(perm, rng);

    std::vector<FoldSplit> folds;
    for (int f = 0; f < k; ++f) {
        FoldSplit split;
        split.fold_id = f;
        split.seed = mix_seed(seed, 200 + static_cast<std::uint64_t>(f));
        std::set<Edge> test;
        for (std::size_t i = 0; i < m; ++i) {
            const Edge e = positives[perm[static_cast<std::size_t>(f) * m + i]];
            split.test_pairs.push_back({e.first, e.second, 1});
            test.insert(e);
        }
        // Partial Fisher-Yates over the negative pool.
        Rng neg_rng(split.seed);
        std::vector<std::size_t> pool(negatives.size());
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < m; ++i) {
            std::swap(pool[i], pool[i + uniform_index(neg_rng, pool.size() - i)]);
            const Edge e = negatives[pool[i]];
            split.test_pairs.push_back({e.first, e.second, 0});
            test.insert(e);
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j || test.count({i, j})) continue;
                split.train_pairs.push_back({i, j, g.has_edge(i, j) ? 1 : 0});
            }
        }
        folds.push_back(std::move(split));
    }
    return folds;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& gold) {
    if (predicted.size() != gold.size()) throw Error("compute_metrics: predicted/gold length mismatch");
    Metrics m;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool p = predicted[i] != 0, g = gold[i] != 0;
        if (p && g) ++m.tp;
        else if (p && !g) ++m.fp;
        else if (!p && g) ++m.fn;
        else ++m.tn;
    }
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    else m.precision_undefined = true;
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    else m.recall_undefined = true;
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

Json Metrics::to_json() const {
    Json j{{"precision", precision}, {"recall", recall}, {"f1", f1},
           {"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}};
    if (precision_undefined) j["precision_undefined"] = true;
    if (recall_undefined) j["recall_undefined"] = true;
    return j;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::NB: return "NB";
        case Method::SVM: return "SVM";
        case Method::LR: return "LR";
        case Method::RF: return "RF";
        case Method::GAE: return "GAE";
        case Method::VGAE: return "VGAE";
    }
    return "SVM";
}

Method parse_method(std::string_view s) {
    const std::string f = casefold(s);
    if (f == "nb" || f == "naive_bayes") return Method::NB;
    if (f == "svm" || f == "linear_svm") return Method::SVM;
    if (f == "lr" || f == "logistic_regression") return Method::LR;
    if (f == "rf" || f == "random_forest") return Method::RF;
    if (f == "gae") return Method::GAE;
    if (f == "vgae") return Method::VGAE;
    throw Error("unknown method '" + std::string(s) + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> m{Method::NB, Method::SVM, Method::LR, Method::RF, Method::GAE, Method::VGAE};
    return m;
}

Json ExperimentConfig::to_json() const {
    return Json{{"folds", folds},
                {"test_pos_frac", test_pos_frac},
                {"seed", seed},
                {"embed", embed},
                {"classifier", classifier},
                {"gae", gae},
                {"oversample_gae", oversample_gae},
                {"shuffle_train_labels", shuffle_train_labels},
                {"threshold", threshold}};
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    ExperimentConfig c;
    c.folds = j.value("folds", c.folds);
    c.test_pos_frac = j.value("test_pos_frac", c.test_pos_frac);
    c.seed = j.value("seed", c.seed);
    if (j.contains("embed")) c.embed = j.at("embed").get<EmbedConfig>();
    if (j.contains("classifier")) c.classifier = j.at("classifier").get<ClassifierHyper>();
    if (j.contains("gae")) c.gae = j.at("gae").get<GaeConfig>();
    c.oversample_gae = j.value("oversample_gae", c.oversample_gae);
    c.shuffle_train_labels = j.value("shuffle_train_labels", c.shuffle_train_labels);
    c.threshold = j.value("threshold", c.threshold);
    return c;
}

namespace {

std::optional<ClassifierKind> classifier_for(Method m) {
    switch (m) {
        case Method::NB: return ClassifierKind::NaiveBayes;
        case Method::SVM: return ClassifierKind::LinearSvm;
        case Method::LR: return ClassifierKind::LogisticRegression;
        case Method::RF: return ClassifierKind::RandomForest;
        default: return std::nullopt;
    }
}

PairDataset to_dataset(const Matrix& x, const std::vector<LabeledPair>& pairs) {
    std::vector<Edge> e;
    std::vector<int> y;
    e.reserve(pairs.size());
    y.reserve(pairs.size());
    for (const auto& p : pairs) {
        e.emplace_back(p.src, p.tgt);
        y.push_back(p.label);
    }
    return make_pairs(x, e, y);
}

FoldResult run_fold(Method method, const Matrix& x, const ConceptGraph& g, const FoldSplit& fold,
                    const ExperimentConfig& cfg) {
    std::vector<LabeledPair> train = fold.train_pairs;
    if (cfg.shuffle_train_labels) {
        std::vector<int> labels;
        for (const auto& p : train) labels.push_back(p.label);
        Rng rng(mix_seed(fold.seed, 41));
        shuffle(labels, rng);
        for (std::size_t i = 0; i < train.size(); ++i) train[i].label = labels[i];
    }

    std::vector<Edge> test_edges;
    std::vector<int> gold;
    for (const auto& p : fold.test_pairs) {
        test_edges.emplace_back(p.src, p.tgt);
        gold.push_back(p.label);
    }

    Prediction pred;
    if (auto kind = classifier_for(method)) {
        const PairDataset balanced = oversample(to_dataset(x, train), fold.seed);
        const auto clf = train_classifier(*kind, balanced, cfg.classifier, fold.seed);
        pred = predict_pairs(*clf, make_pairs(x, test_edges, gold).features);
    } else {
        GaeConfig gcfg = cfg.gae;
        gcfg.variational = method == Method::VGAE;
        gcfg.seed = fold.seed;
        std::vector<Edge> train_edges;
        std::vector<double> weights;
        if (cfg.oversample_gae) {
            const PairDataset balanced = oversample(to_dataset(Matrix::Zero(static_cast<Eigen::Index>(g.size()), 0), train), fold.seed);
            std::map<Edge, double> mult;
            for (std::size_t i = 0; i < balanced.size(); ++i) {
                if (balanced.labels[i]) mult[balanced.pairs[i]] += 1.0;
            }
            for (const auto& [e, w] : mult) {
                train_edges.push_back(e);
                weights.push_back(w);
            }
            gcfg.parallel_edge_weights = true;
        } else {
            for (const auto& p : train) {
                if (p.label) train_edges.emplace_back(p.src, p.tgt);
            }
        }
        const GraphAEModel model =
            train_graph_autoencoder(x, g.size(), train_edges, gcfg, cfg.oversample_gae ? &weights : nullptr);
        pred = predict_links(model, x, model.a_norm, test_edges, cfg.threshold);
    }

    FoldResult r;
    r.fold_id = fold.fold_id;
    r.metrics = compute_metrics(pred.labels, gold);
    for (std::size_t i = 0; i < test_edges.size(); ++i) {
        r.predictions.push_back({test_edges[i].first, test_edges[i].second, gold[i], pred.labels[i], pred.scores[i]});
    }
    return r;
}

}  // namespace

MethodResult evaluate_method(Method method, const Matrix& x, const ConceptGraph& g, const std::vector<FoldSplit>& folds,
                             const ExperimentConfig& cfg) {
    if (x.rows() != static_cast<Eigen::Index>(g.size())) throw Error("evaluate_method: embedding rows do not match graph");
    if (folds.empty()) throw Error("evaluate_method: no folds");
    MethodResult res;
    res.method = method;
    for (const auto& fold : folds) {
        res.folds.push_back(run_fold(method, x, g, fold, cfg));
        res.precision += res.folds.back().metrics.precision;
        res.recall += res.folds.back().metrics.recall;
        res.f1 += res.folds.back().metrics.f1;
    }
    const double k = static_cast<double>(folds.size());
    res.precision /= k;
    res.recall /= k;
    res.f1 /= k;
    return res;
}

ExperimentReport run_experiment(const std::vector<CorpusSetting>& settings, const ConceptGraph& g,
                                const std::vector<Method>& methods, const ExperimentConfig& cfg) {
    if (settings.empty()) throw Error("run_experiment: no corpus settings");
    ExperimentReport report;
    report.config = cfg.to_json();
    const auto folds = make_folds(g, cfg.folds, cfg.test_pos_frac, cfg.seed);
    for (const auto& s : settings) {
        if (s.documents.empty()) throw Error("run_experiment: corpus setting '" + s.name + "' has no documents");
        EmbedConfig ecfg = cfg.embed;
        ecfg.seed = mix_seed(cfg.seed, 51);
        const PvdmModel model = train_pvdm(s.documents, ecfg);
        const EmbeddingMatrix x = build_concept_matrix(model, g.names());
        SettingResult sr;
        sr.setting = s.name;
        for (Method m : methods) sr.methods.push_back(evaluate_method(m, x.x, g, folds, cfg));
        report.settings.push_back(std::move(sr));
    }
    return report;
}

Json ExperimentReport::to_json(bool include_predictions) const {
    Json out{{"config", config}, {"settings", Json::array()}};
    for (const auto& s : settings) {
        Json js{{"setting", s.setting}, {"methods", Json::array()}};
        for (const auto& m : s.methods) {
            Json jm{{"method", std::string(to_string(m.method))},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"folds", Json::array()}};
            for (const auto& f : m.folds) {
                Json jf{{"fold", f.fold_id}, {"metrics", f.metrics.to_json()}};
                if (include_predictions) {
                    Json preds = Json::array();
                    for (const auto& p : f.predictions) preds.push_back({p.src, p.tgt, p.gold, p.predicted, p.score});
                    jf["predictions"] = std::move(preds);
                }
                jm["folds"].push_back(std::move(jf));
            }
            js["methods"].push_back(std::move(jm));
        }
        out["settings"].push_back(std::move(js));
    }
    return out;
}

std::string ExperimentReport::to_csv() const {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    out << "setting,method,precision,recall,f1\n";
    for (const auto& s : settings) {
        for (const auto& m : s.methods) {
            out << s.setting << ',' << to_string(m.method) << ',' << m.precision << ',' << m.recall << ',' << m.f1 << '\n';
        }
    }
    return out.str();
}

RecoveredGraph recover_graph(const ConceptGraph& g, const std::vector<PairPrediction>& predictions) {
    RecoveredGraph r;
    std::set<Edge> edges;
    std::set<int> vertices;
    for (const auto& p : predictions) {
        if (!p.predicted) continue;
        if (p.src < 0 || p.tgt < 0 || static_cast<std::size_t>(p.src) >= g.size() ||
            static_cast<std::size_t>(p.tgt) >= g.size()) {
            throw Error("recover_graph: prediction references unknown concept index");
        }
        edges.insert({p.src, p.tgt});
        vertices.insert(p.src);
        vertices.insert(p.tgt);
    }
    r.edges.assign(edges.begin(), edges.end());
    r.vertex_count = vertices.size();
    r.dot = to_dot(g, &r.edges, true);
    Json vs = Json::array();
    for (int v : vertices) vs.push_back({{"index", v}, {"name", g.name(v)}});
    Json es = Json::array();
    for (const auto& [u, v] : r.edges) es.push_back({{"source", g.name(u)}, {"target", g.name(v)}});
    r.json = Json{{"vertices", vs}, {"edges", es}, {"vertex_count", r.vertex_count}, {"edge_count", r.edges.size()}};
    return r;
}

}  // namespace prereq
