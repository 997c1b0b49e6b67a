#include "prereq/pairclf.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <map>
#include <set>

using namespace prereq;
using namespace testutil;

namespace {

EmbeddingMatrix random_embedding(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    EmbeddingMatrix e;
    e.concepts = letter_names(n);
    e.x.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) e.x(i, j) = standard_normal(rng);
    return e;
}

/// Two Gaussian blobs separated along every axis.
PairDataset blobs(int per_class, int d, double gap, std::uint64_t seed) {
    Rng rng(seed);
    PairDataset ds;
    ds.features.resize(2 * per_class, d);
    for (int i = 0; i < 2 * per_class; ++i) {
        const int label = i < per_class ? 1 : 0;
        for (int j = 0; j < d; ++j) ds.features(i, j) = standard_normal(rng) * 0.3 + (label ? gap : -gap);
        ds.labels.push_back(label);
        ds.pairs.emplace_back(i, i);
    }
    return ds;
}

double accuracy(const Prediction& p, const std::vector<int>& y) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < y.size(); ++i) ok += p.labels[i] == y[i];
    return static_cast<double>(ok) / static_cast<double>(y.size());
}

const std::vector<ClassifierKind> kAllKinds{ClassifierKind::NaiveBayes, ClassifierKind::LinearSvm,
                                            ClassifierKind::LogisticRegression, ClassifierKind::RandomForest};

}  // namespace

TEST_CASE("build_pair_dataset: small graphs") {
    SUBCASE("n=3 without edges") {
        const ConceptGraph g(letter_names(3), {});
        const PairDataset ds = build_pair_dataset(random_embedding(3, 4, 1), g);
        CHECK(ds.size() == 6);
        CHECK(ds.positives() == 0);
    }
    SUBCASE("direction matters") {
        const ConceptGraph g(letter_names(2), {{0, 1}});
        const PairDataset ds = build_pair_dataset(random_embedding(2, 4, 1), g);
        REQUIRE(ds.size() == 2);
        CHECK(ds.pairs[0] == Edge{0, 1});
        CHECK(ds.labels[0] == 1);
        CHECK(ds.pairs[1] == Edge{1, 0});
        CHECK(ds.labels[1] == 0);
    }
    SUBCASE("dimension mismatch") {
        const ConceptGraph g(letter_names(4), {});
        CHECK_THROWS_AS(build_pair_dataset(random_embedding(3, 4, 1), g), Error);
    }
}

TEST_CASE("pair features are the concatenated embedding rows") {
    const EmbeddingMatrix e = random_embedding(6, 3, 2);
    const ConceptGraph g = random_graph(6, 0.3, 4);
    const PairDataset ds = build_pair_dataset(e, g);
    CHECK(ds.size() == 30);
    CHECK(ds.positives() == g.edges().size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto [u, v] = ds.pairs[i];
        CHECK(ds.features.row(static_cast<Eigen::Index>(i)).head(3) == e.x.row(u));
        CHECK(ds.features.row(static_cast<Eigen::Index>(i)).tail(3) == e.x.row(v));
        CHECK(ds.labels[i] == (g.has_edge(u, v) ? 1 : 0));
    }
}

TEST_CASE("oversample balances classes by duplicating positives") {
    PairDataset ds;
    ds.features.resize(110, 2);
    for (int i = 0; i < 110; ++i) {
        ds.pairs.emplace_back(i, i + 1);
        ds.labels.push_back(i < 10 ? 1 : 0);
        ds.features(i, 0) = i;
        ds.features(i, 1) = -i;
    }
    const PairDataset out = oversample(ds, 3);
    CHECK(out.positives() == 100);
    CHECK(out.size() == 200);
    std::multiset<Edge> neg_in, neg_out;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (!ds.labels[i]) neg_in.insert(ds.pairs[i]);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (out.labels[i]) {
            CHECK(out.pairs[i].first < 10);
            CHECK(out.features(r, 0) == out.pairs[i].first);
        } else {
            neg_out.insert(out.pairs[i]);
        }
    }
    CHECK(neg_in == neg_out);
    CHECK(oversample(ds, 3).pairs == out.pairs);
    CHECK(oversample(ds, 4).pairs != out.pairs);
}

TEST_CASE("oversample: balanced input keeps its multiset; single class is an error") {
    PairDataset ds;
    ds.features = Matrix::Zero(4, 1);
    ds.pairs = {{0, 1}, {1, 0}, {2, 3}, {3, 2}};
    ds.labels = {1, 0, 1, 0};
    const PairDataset out = oversample(ds, 1);
    CHECK(std::multiset<Edge>(out.pairs.begin(), out.pairs.end()) == std::multiset<Edge>(ds.pairs.begin(), ds.pairs.end()));
    ds.labels = {0, 0, 0, 0};
    CHECK_THROWS_AS(oversample(ds, 1), Error);
}

TEST_CASE("linear models reach perfect accuracy on a separable set") {
    const PairDataset ds = blobs(40, 2, 1.0, 8);
    for (auto kind : {ClassifierKind::LinearSvm, ClassifierKind::LogisticRegression}) {
        const auto clf = train_classifier(kind, ds);
        CHECK(accuracy(predict_pairs(*clf, ds.features), ds.labels) == 1.0);
    }
}

TEST_CASE("every classifier recovers the labels of an easy training set") {
    const PairDataset ds = blobs(30, 4, 1.0, 9);
    for (auto kind : kAllKinds) {
        const auto clf = train_classifier(kind, ds);
        CHECK(accuracy(predict_pairs(*clf, ds.features), ds.labels) == 1.0);
    }
}

TEST_CASE("naive bayes is symmetric under class swap") {
    PairDataset ds = blobs(25, 3, 0.4, 10);
    const PairDataset easy = ds;
    const auto a = train_classifier(ClassifierKind::NaiveBayes, ds);
    for (auto& y : ds.labels) y = 1 - y;
    const auto b = train_classifier(ClassifierKind::NaiveBayes, ds);
    const Prediction pa = predict_pairs(*a, easy.features), pb = predict_pairs(*b, easy.features);
    for (std::size_t i = 0; i < easy.size(); ++i) {
        CHECK(pa.scores[i] == doctest::Approx(1.0 - pb.scores[i]).epsilon(1e-9));
        if (std::abs(pa.scores[i] - 0.5) > 1e-9) CHECK(pa.labels[i] == 1 - pb.labels[i]);
    }
}

TEST_CASE("single-tree stump matches the exhaustive Gini split") {
    Rng rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = 30;
        PairDataset ds;
        ds.features.resize(m, 1);
        for (int i = 0; i < m; ++i) {
            ds.features(i, 0) = std::round(uniform01(rng) * 40.0) / 4.0;
            ds.labels.push_back(uniform01(rng) < 0.3 + 0.4 * (ds.features(i, 0) > 5.0) ? 1 : 0);
            ds.pairs.emplace_back(i, i);
        }
        if (ds.positives() == 0 || ds.positives() == ds.size()) continue;
        // Oracle: every midpoint between distinct sorted values.
        std::vector<double> xs(ds.features.data(), ds.features.data() + m);
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        double best = std::numeric_limits<double>::infinity(), best_t = 0;
        for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
            const double t = 0.5 * (xs[k] + xs[k + 1]);
            double nl = 0, pl = 0, nr = 0, pr = 0;
            for (int i = 0; i < m; ++i) {
                if (ds.features(i, 0) <= t) { ++nl; pl += ds.labels[static_cast<std::size_t>(i)]; }
                else { ++nr; pr += ds.labels[static_cast<std::size_t>(i)]; }
            }
            const double imp = nl * 2 * (pl / nl) * (1 - pl / nl) + nr * 2 * (pr / nr) * (1 - pr / nr);
            if (imp < best - 1e-12) { best = imp; best_t = t; }
        }
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        const GiniSplit s = best_gini_split(ds.features, ds.labels, idx, {0}, 1);
        CHECK(s.impurity == doctest::Approx(best));
        CHECK(s.threshold == doctest::Approx(best_t));

        ClassifierHyper h;
        h.trees = 1;
        h.max_depth = 1;
        h.bootstrap = false;
        const auto clf = train_classifier(ClassifierKind::RandomForest, ds, h, 1);
        const Json j = clf->to_json();
        REQUIRE(j["trees"][0].size() == 3);
        CHECK(j["trees"][0][0][1].get<double>() == doctest::Approx(best_t));
    }
}

TEST_CASE("logistic gradient matches finite differences") {
    Rng rng(13);
    Matrix x(10, 4);
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 4; ++j) x(i, j) = standard_normal(rng);
        y.push_back(uniform01(rng) < 0.5);
    }
    Vector w(4);
    for (int j = 0; j < 4; ++j) w(j) = standard_normal(rng);
    const double b = 0.3, l2 = 0.1, h = 1e-6;
    const auto g = logistic_loss_grad(x, y, w, b, l2);
    auto rel = [](double a, double c) { return std::abs(a - c) / std::max(1e-8, std::abs(a) + std::abs(c)); };
    for (int j = 0; j < 4; ++j) {
        Vector wp = w, wm = w;
        wp(j) += h;
        wm(j) -= h;
        const double fd = (logistic_loss_grad(x, y, wp, b, l2).loss - logistic_loss_grad(x, y, wm, b, l2).loss) / (2 * h);
        CHECK(rel(g.grad_w(j), fd) < 1e-4);
    }
    const double fdb = (logistic_loss_grad(x, y, w, b + h, l2).loss - logistic_loss_grad(x, y, w, b - h, l2).loss) / (2 * h);
    CHECK(rel(g.grad_b, fdb) < 1e-4);
}

TEST_CASE("logistic probabilities lie in (0,1) and are monotone in the margin") {
    const PairDataset ds = blobs(30, 3, 0.3, 14);
    const auto clf = train_classifier(ClassifierKind::LogisticRegression, ds);
    const Json j = clf->to_json();
    const Prediction p = predict_pairs(*clf, ds.features);
    // Recompute margins from the stored parameters.
    std::vector<std::pair<double, double>> mp;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double m = j["b"].get<double>();
        for (int k = 0; k < 3; ++k) {
            const double z = (ds.features(static_cast<Eigen::Index>(i), k) - j["mean"][k].get<double>()) / j["scale"][k].get<double>();
            m += z * j["w"][k].get<double>();
        }
        mp.emplace_back(m, p.scores[i]);
        CHECK(p.scores[i] > 0.0);
        CHECK(p.scores[i] < 1.0);
    }
    std::sort(mp.begin(), mp.end());
    for (std::size_t i = 1; i < mp.size(); ++i) CHECK(mp[i].second >= mp[i - 1].second);
}

TEST_CASE("identical rows give identical predictions; width is checked") {
    const PairDataset ds = blobs(20, 2, 0.5, 15);
    const Matrix same = Matrix::Constant(5, 2, 0.1);
    for (auto kind : kAllKinds) {
        const auto clf = train_classifier(kind, ds);
        const Prediction p = predict_pairs(*clf, same);
        for (std::size_t i = 1; i < 5; ++i) {
            CHECK(p.labels[i] == p.labels[0]);
            CHECK(p.scores[i] == p.scores[0]);
        }
        CHECK_THROWS_AS(predict_pairs(*clf, Matrix::Zero(2, 3)), Error);
    }
}

TEST_CASE("training errors") {
    PairDataset ds = blobs(5, 2, 1.0, 16);
    ds.features(0, 0) = std::nan("");
    CHECK_THROWS_AS(train_classifier(ClassifierKind::LinearSvm, ds), Error);
    PairDataset one = blobs(5, 2, 1.0, 16);
    std::fill(one.labels.begin(), one.labels.end(), 1);
    CHECK_THROWS_AS(train_classifier(ClassifierKind::NaiveBayes, one), Error);
    CHECK_THROWS_AS(parse_classifier_kind("kernel_svm"), Error);
}

TEST_CASE("training is seed-deterministic and checkpoints round trip") {
    const PairDataset ds = blobs(25, 4, 0.3, 17);
    const Matrix probe = blobs(10, 4, 0.3, 18).features;
    for (auto kind : kAllKinds) {
        const auto a = train_classifier(kind, ds, {}, 5);
        const auto b = train_classifier(kind, ds, {}, 5);
        CHECK(a->decision(probe) == b->decision(probe));
        const auto back = classifier_from_json(Json::parse(classifier_to_json(*a).dump()));
        CHECK(back->kind() == kind);
        CHECK(back->decision(probe) == a->decision(probe));
    }
    ClassifierHyper h;
    h.trees = 10;
    const auto r1 = train_classifier(ClassifierKind::RandomForest, ds, h, 1);
    const auto r2 = train_classifier(ClassifierKind::RandomForest, ds, h, 2);
    CHECK(r1->to_json() != r2->to_json());
}
