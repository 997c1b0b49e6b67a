// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is nonzero when a gated
// criterion fails.
#include "prereq/embed.hpp"
#include "prereq/eval.hpp"
#include "prereq/gae.hpp"
#include "prereq/graph.hpp"
#include "prereq/pairclf.hpp"
#include "prereq/synthetic.hpp"

#include <CLI11.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace prereq;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status = Status::Pass;
    std::string detail;
};

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

/// Collects failed checks with a readable message each.
struct Checks {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        if (failures.empty()) return {Status::Pass, summary};
        std::string msg;
        for (const auto& f : failures) msg += (msg.empty() ? "" : "; ") + f;
        return {Status::Fail, msg};
    }
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream o;
    o.precision(digits);
    o << std::fixed << v;
    return o.str();
}

// 1 -------------------------------------------------------------------------

Outcome graph_analytics() {
    const char* env = std::getenv("LECTUREBANK_DIR");
    const fs::path dir = env ? fs::path(env) : fs::path(FIXTURES_DIR) / "lecturebank";
    if (!fs::exists(dir / "concepts.tsv")) {
        return {Status::Fail, "released 208-concept annotation not found at " + dir.string() +
                                  " (set LECTUREBANK_DIR to its directory)"};
    }
    const Timer t;
    const ConceptGraph g = load_graph_dir(dir);
    const GraphStats s = graph_statistics(g);
    const double secs = t.seconds();
    Checks c;
    c.expect(s.vertices == 208, "vertices " + std::to_string(s.vertices) + " != 208");
    c.expect(s.edges == 921, "edges " + std::to_string(s.edges) + " != 921");
    c.expect(s.mutual_pairs.size() == 12, "mutual pairs " + std::to_string(s.mutual_pairs.size()) + " != 12");
    c.expect(s.isolated.size() == 7, "isolated " + std::to_string(s.isolated.size()) + " != 7");
    c.expect(s.longest_path.size() == 14, "longest path " + std::to_string(s.longest_path.size()) + " != 14");
    c.expect(!s.top_in.empty() && s.top_in[0].concept_name == "Neural Machine Translation" && s.top_in[0].degree == 19,
             "top in-degree is not (Neural Machine Translation, 19)");
    c.expect(!s.top_out.empty() && s.top_out[0].concept_name == "Data Structures and Algorithms" &&
                 s.top_out[0].degree == 106,
             "top out-degree is not (Data Structures and Algorithms, 106)");
    c.expect(secs < 1.0, "took " + fmt(secs, 3) + " s");
    return c.outcome("208 vertices, 921 edges, 12 mutual pairs, 7 isolated, path 14, in " + fmt(secs, 3) + " s");
}

// 2 -------------------------------------------------------------------------

struct TableRow {
    const char* setting;
    const char* method;
    double p, r, f1;
};

// Reference precision/recall/F1 per corpus setting, oversampled training, PV-DM features.
constexpr std::array<TableRow, 18> kTable{{
    {"TutorialBank", "NB", 0.761, 0.453, 0.567},  {"TutorialBank", "SVM", 0.832, 0.703, 0.761},
    {"TutorialBank", "LR", 0.819, 0.604, 0.693},  {"TutorialBank", "RF", 0.871, 0.459, 0.599},
    {"TutorialBank", "GAE", 0.634, 0.884, 0.725}, {"TutorialBank", "VGAE", 0.599, 0.895, 0.717},
    {"LectureBank", "NB", 0.853, 0.611, 0.710},   {"LectureBank", "SVM", 0.835, 0.668, 0.740},
    {"LectureBank", "LR", 0.840, 0.640, 0.724},   {"LectureBank", "RF", 0.831, 0.624, 0.712},
    {"LectureBank", "GAE", 0.577, 0.905, 0.705},  {"LectureBank", "VGAE", 0.545, 0.921, 0.684},
    {"Combined", "NB", 0.614, 0.670, 0.641},      {"Combined", "SVM", 0.824, 0.688, 0.748},
    {"Combined", "LR", 0.794, 0.613, 0.690},      {"Combined", "RF", 0.787, 0.519, 0.625},
    {"Combined", "GAE", 0.594, 0.899, 0.715},     {"Combined", "VGAE", 0.578, 0.916, 0.708},
}};

Outcome metric_oracle() {
    Rng rng(2024);
    int exact = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 60);
        std::vector<int> p(n), y(n);
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = uniform01(rng) < 0.5;
            y[i] = uniform01(rng) < 0.5;
            tp += p[i] && y[i];
            fp += p[i] && !y[i];
            fn += !p[i] && y[i];
            tn += !p[i] && !y[i];
        }
        const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        const Metrics m = compute_metrics(p, y);
        exact += m.tp == tp && m.fp == fp && m.fn == fn && m.tn == tn && m.precision == prec && m.recall == rec &&
                 m.f1 == f1;
    }
    Checks c;
    c.expect(exact == 1000, "oracle agreed on " + std::to_string(exact) + "/1000 cases");
    std::vector<std::string> off;
    bool all_below = true;
    for (const auto& row : kTable) {
        const double h = f1_score(row.p, row.r);
        if (std::abs(std::round(h * 1000.0) / 1000.0 - row.f1) > 0.001 + 1e-9) {
            off.push_back(std::string(row.setting) + "/" + row.method + " " + fmt(row.f1, 3) + " vs " + fmt(h, 4));
            all_below = all_below && row.f1 < h;
        }
    }
    if (!off.empty()) {
        std::string rows;
        for (const auto& o : off) rows += (rows.empty() ? "" : ", ") + o;
        c.expect(false, "oracle " + std::to_string(exact) + "/1000 exact, but " + std::to_string(off.size()) +
                            "/18 reference rows differ from the rounded harmonic mean by more than 0.001 (" + rows + ")" +
                            (all_below ? "; every miss is below the harmonic mean, as expected when F1 is averaged per fold"
                                       : ""));
    }
    return c.outcome("oracle 1000/1000 exact; all 18 reference rows consistent");
}

// 3 -------------------------------------------------------------------------

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

double pvdm_worst() {
    Rng rng(3);
    PvdmModel m;
    m.config.dim = 6;
    auto fill = [&](Matrix& x, int rows) { x = standard_normal_matrix(rows, 6, rng) * 0.5; };
    fill(m.word_vectors, 8);
    fill(m.output_weights, 8);
    fill(m.doc_vectors, 2);
    const PvdmExample ex{1, {0, 2, 4}, 3, {5, 7}};
    const PvdmGradient g = pvdm_example_gradient(m, ex);
    const double h = 1e-6;
    auto fd = [&](Matrix& x, int row, int col) {
        const double keep = x(row, col);
        x(row, col) = keep + h;
        const double up = pvdm_example_loss(m, ex);
        x(row, col) = keep - h;
        const double down = pvdm_example_loss(m, ex);
        x(row, col) = keep;
        return (up - down) / (2 * h);
    };
    double worst = 0;
    for (int k = 0; k < 6; ++k) {
        worst = std::max(worst, rel_err(g.doc(k), fd(m.doc_vectors, ex.doc, k)));
        for (std::size_t i = 0; i < ex.context.size(); ++i)
            worst = std::max(worst, rel_err(g.context[i](k), fd(m.word_vectors, ex.context[i], k)));
        worst = std::max(worst, rel_err(g.target_out(k), fd(m.output_weights, ex.target, k)));
        for (std::size_t i = 0; i < ex.negatives.size(); ++i)
            worst = std::max(worst, rel_err(g.negative_out[i](k), fd(m.output_weights, ex.negatives[i], k)));
    }
    return worst;
}

double logistic_worst() {
    Rng rng(4);
    const Matrix x = standard_normal_matrix(10, 5, rng);
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) y.push_back(uniform01(rng) < 0.5);
    const Vector w = standard_normal_matrix(5, 1, rng).col(0);
    const double b = -0.2, l2 = 0.05, h = 1e-6;
    const LogisticLossGrad g = logistic_loss_grad(x, y, w, b, l2);
    double worst = 0;
    for (int j = 0; j < 5; ++j) {
        Vector up = w, down = w;
        up(j) += h;
        down(j) -= h;
        const double fd = (logistic_loss_grad(x, y, up, b, l2).loss - logistic_loss_grad(x, y, down, b, l2).loss) / (2 * h);
        worst = std::max(worst, rel_err(g.grad_w(j), fd));
    }
    const double fdb = (logistic_loss_grad(x, y, w, b + h, l2).loss - logistic_loss_grad(x, y, w, b - h, l2).loss) / (2 * h);
    return std::max(worst, rel_err(g.grad_b, fdb));
}

double gae_worst(bool variational) {
    Rng rng(variational ? 6 : 5);
    const Matrix x = standard_normal_matrix(3, 4, rng);
    GaeConfig cfg;
    cfg.hidden1 = 5;
    cfg.hidden2 = 3;
    cfg.variational = variational;
    const GaeInputs in = make_gae_inputs(3, {{0, 1}, {1, 2}}, cfg);
    const GaeObjective obj(x, in.a_norm, in.target, in.pos_weight, variational, 1.0 / 9.0);
    GcnParams p = GcnParams::init(4, cfg);
    for (Matrix* m : p.active(variational)) *m *= 3.0;
    const Matrix noise = standard_normal_matrix(3, 3, rng);
    const Matrix* np = variational ? &noise : nullptr;
    GcnParams grads;
    obj.evaluate(p, np, &grads);
    double worst = 0;
    const auto params = p.active(variational);
    const auto gs = grads.active(variational);
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix numeric(params[k]->rows(), params[k]->cols());
        for (Eigen::Index i = 0; i < numeric.rows(); ++i) {
            for (Eigen::Index j = 0; j < numeric.cols(); ++j) {
                const double keep = (*params[k])(i, j);
                (*params[k])(i, j) = keep + h;
                const double up = obj.evaluate(p, np, nullptr).total;
                (*params[k])(i, j) = keep - h;
                const double down = obj.evaluate(p, np, nullptr).total;
                (*params[k])(i, j) = keep;
                numeric(i, j) = (up - down) / (2 * h);
            }
        }
        worst = std::max(worst, (*gs[k] - numeric).norm() / std::max(1e-12, gs[k]->norm() + numeric.norm()));
    }
    return worst;
}

Outcome gradients() {
    const Timer t;
    const double pv = pvdm_worst(), lr = logistic_worst(), gae = gae_worst(false), vgae = gae_worst(true);
    const double secs = t.seconds();
    Checks c;
    c.expect(pv < 1e-4, "PV-DM relative error " + std::to_string(pv));
    c.expect(lr < 1e-4, "logistic regression relative error " + std::to_string(lr));
    c.expect(gae < 1e-4, "GAE relative error " + std::to_string(gae));
    c.expect(vgae < 1e-4, "VGAE relative error " + std::to_string(vgae));
    c.expect(secs < 10.0, "took " + fmt(secs, 2) + " s");
    std::ostringstream o;
    o.precision(2);
    o << std::scientific << "max relative error PV-DM " << pv << ", LR " << lr << ", GAE " << gae << ", VGAE " << vgae
      << std::fixed << " in " << secs << " s";
    return c.outcome(o.str());
}

// 4 -------------------------------------------------------------------------

std::vector<Edge> planted_blocks(int half, double p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    for (int i = 0; i < 2 * half; ++i)
        for (int j = 0; j < 2 * half; ++j)
            if (i != j && (i < half) == (j < half) && uniform01(rng) < p) edges.emplace_back(i, j);
    return edges;
}

Outcome vgae_invariants() {
    Checks c;
    c.expect(kl_divergence(Matrix::Zero(5, 3), Matrix::Zero(5, 3)) == 0.0, "KL at the origin is not 0");
    Rng rng(8);
    double min_kl = 1e300;
    for (int i = 0; i < 200; ++i) {
        min_kl = std::min(min_kl, kl_divergence(standard_normal_matrix(4, 3, rng), standard_normal_matrix(4, 3, rng)));
    }
    c.expect(min_kl >= 0.0, "negative KL " + std::to_string(min_kl));
    bool decoder_ok = true;
    for (int i = 0; i < 50; ++i) {
        const Matrix p = decode_adjacency(standard_normal_matrix(7, 4, rng));
        decoder_ok = decoder_ok && p.isApprox(p.transpose(), 0.0) && p.minCoeff() > 0.0 && p.maxCoeff() < 1.0;
    }
    c.expect(decoder_ok, "decoder output not symmetric or not inside (0,1)");
    GaeConfig cfg;
    cfg.variational = true;
    cfg.seed = 9;
    const GraphAEModel m = train_graph_autoencoder(Matrix::Identity(20, 20), 20, planted_blocks(10, 0.5, 10), cfg);
    const double first = m.history.front().loss, last = m.history.back().loss;
    c.expect(m.history.size() == 200 && last < first,
             "training loss did not decrease (" + fmt(first) + " -> " + fmt(last) + ")");
    return c.outcome("min KL " + fmt(min_kl) + "; planted 20-vertex VGAE loss " + fmt(first) + " -> " + fmt(last));
}

// 5 -------------------------------------------------------------------------

Outcome protocol_invariants() {
    Checks c;
    std::size_t folds_checked = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SyntheticData d = generate_synthetic(SyntheticSpec{.concepts = 50, .seed = seed});
        const ConceptGraph& g = d.graph;
        const std::size_t m = g.edges().size() / 10;
        const auto folds = make_folds(g, 5, 0.1, seed);
        std::set<Edge> seen;
        Rng rng(seed);
        const Matrix x = standard_normal_matrix(static_cast<Eigen::Index>(g.size()), 3, rng);
        for (const auto& f : folds) {
            std::size_t pos = 0, neg = 0;
            for (const auto& p : f.test_pairs) {
                (p.label ? pos : neg)++;
                if (p.label) c.expect(seen.insert({p.src, p.tgt}).second, "test positive repeated across folds");
            }
            c.expect(pos == m && neg == m, "fold " + std::to_string(f.fold_id) + " has " + std::to_string(pos) + "/" +
                                               std::to_string(neg) + " test pairs, want " + std::to_string(m));
            std::vector<Edge> e;
            std::vector<int> y;
            for (const auto& p : f.train_pairs) {
                e.emplace_back(p.src, p.tgt);
                y.push_back(p.label);
            }
            const PairDataset balanced = oversample(make_pairs(x, e, y), f.seed);
            c.expect(2 * balanced.positives() == balanced.size(), "oversampled training set is not balanced");
            ++folds_checked;
        }
    }
    return c.outcome(std::to_string(folds_checked) + " folds over 5 synthetic graphs: exact test sizes, disjoint positives, balanced training sets");
}

// 6 -------------------------------------------------------------------------

Outcome synthetic_benchmark() {
    const Timer t;
    const SyntheticData d = generate_synthetic(SyntheticSpec{.seed = 7});
    ExperimentConfig cfg;
    cfg.seed = 7;
    const double f1 = run_experiment({{"synthetic", d.documents}}, d.graph, {Method::SVM}, cfg).settings[0].methods[0].f1;
    cfg.shuffle_train_labels = true;
    const double control =
        run_experiment({{"synthetic", d.documents}}, d.graph, {Method::SVM}, cfg).settings[0].methods[0].f1;
    const double secs = t.seconds();
    Checks c;
    c.expect(f1 >= 0.70, "SVM F1 " + fmt(f1) + " < 0.70");
    c.expect(f1 - control >= 0.15, "margin over control " + fmt(f1 - control) + " < 0.15");
    c.expect(secs < 300.0, "took " + fmt(secs, 1) + " s");
    return c.outcome(std::to_string(d.graph.size()) + " concepts, " + std::to_string(d.graph.edges().size()) +
                     " edges: SVM F1 " + fmt(f1) + ", shuffled control " + fmt(control) + ", " + fmt(secs, 1) + " s");
}

// 7 -------------------------------------------------------------------------

Outcome conditional_reproduction() {
    const char* graph = std::getenv("LECTUREBANK_DIR");
    const char* lb = std::getenv("LECTUREBANK_CORPUS");
    const char* tb = std::getenv("TUTORIALBANK_CORPUS");
    if (!graph || !lb || !tb) {
        return {Status::Skip, "needs LECTUREBANK_DIR, LECTUREBANK_CORPUS and TUTORIALBANK_CORPUS (real corpora); not gated"};
    }
    const ConceptGraph g = load_graph_dir(graph);
    const DocumentSet tut = ingest_documents(tb, Provenance::TutorialBank);
    const DocumentSet lec = ingest_documents(lb, Provenance::LectureBank);
    const std::vector<CorpusSetting> settings{
        {"TutorialBank", tut}, {"LectureBank", lec}, {"Combined", DocumentSet::combine(tut, lec)}};
    const ExperimentReport r = run_experiment(settings, g, all_methods(), ExperimentConfig{});
    Checks c;
    double svm_tb = 0;
    for (const auto& s : r.settings) {
        double best = -1, svm = 0;
        for (const auto& m : s.methods) {
            if (m.method == Method::SVM) svm = m.f1;
            if (m.method == Method::GAE || m.method == Method::VGAE)
                c.expect(m.recall > m.precision, s.setting + "/" + std::string(to_string(m.method)) + " recall <= precision");
            else
                best = std::max(best, m.f1);
        }
        c.expect(svm >= best, s.setting + ": SVM is not the best classifier");
        if (s.setting == "TutorialBank") svm_tb = svm;
    }
    c.expect(std::abs(svm_tb - 0.761) <= 0.08, "SVM/TutorialBank F1 " + fmt(svm_tb) + " outside 0.761 +- 0.08");
    Outcome o = c.outcome("SVM/TutorialBank F1 " + fmt(svm_tb) + "; trends hold");
    o.detail += " (not gated)";
    return o;
}

// 8 -------------------------------------------------------------------------

std::string run_capture(const std::string& command) {
    std::string out;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) throw Error("cannot run " + command);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    if (pclose(pipe) != 0) throw Error("command failed: " + command);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome determinism(const std::string& cli) {
    Checks c;
    SyntheticSpec spec;
    spec.concepts = 30;
    spec.seed = 7;
    const SyntheticData d = generate_synthetic(spec);
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.embed.dim = 32;
    cfg.embed.epochs = 5;
    cfg.gae.epochs = 50;
    cfg.classifier.trees = 10;
    const std::vector<Method> methods = all_methods();
    const auto a = run_experiment({{"synthetic", d.documents}}, d.graph, methods, cfg);
    const auto b = run_experiment({{"synthetic", d.documents}}, d.graph, methods, cfg);
    c.expect(a.to_json(true).dump(2) == b.to_json(true).dump(2), "library reports differ");
    c.expect(a.to_csv() == b.to_csv(), "library CSV summaries differ");
    std::string summary = "library: all 6 methods byte-identical";
    if (!cli.empty()) {
        const fs::path work = fs::temp_directory_path() / "prereq_acceptance_determinism";
        fs::remove_all(work);
        fs::create_directories(work);
        std::ofstream(work / "config.json") << cfg.to_json().dump();
        std::string outs[2];
        for (int i = 0; i < 2; ++i) {
            const fs::path report = work / ("report" + std::to_string(i) + ".json");
            outs[i] = run_capture("\"" + cli + "\" evaluate --method all --corpus synthetic --synthetic-concepts 30 --seed 7" +
                                  " --config \"" + (work / "config.json").string() + "\" --predictions --out \"" +
                                  report.string() + "\"");
            outs[i] += slurp(report);
        }
        c.expect(!outs[0].empty() && outs[0] == outs[1], "CLI evaluate reports differ");
        fs::remove_all(work);
        summary += "; CLI evaluate byte-identical";
    }
    return c.outcome(summary);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string cli;
    std::vector<int> only;
    app.add_option("--cli", cli, "prereq executable for command-line determinism checks");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    struct Criterion {
        int id;
        const char* name;
        bool gated;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "graph analytics on the released annotation", true, graph_analytics},
        {2, "metric oracle and reference table consistency", true, metric_oracle},
        {3, "analytic gradients", true, gradients},
        {4, "VGAE invariants", true, vgae_invariants},
        {5, "fold protocol and oversampling", true, protocol_invariants},
        {6, "synthetic end-to-end benchmark", true, synthetic_benchmark},
        {7, "reference trends on real corpora", false, conditional_reproduction},
        {8, "evaluate determinism", true, [&] { return determinism(cli); }},
    };

    int failed = 0;
    for (const auto& cr : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
        std::cout << tag << "  [" << cr.id << "] " << cr.name << ": " << o.detail << std::endl;
        if (o.status == Status::Fail && cr.gated) ++failed;
    }
    return failed ? 1 : 0;
}
