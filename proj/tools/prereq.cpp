#include "prereq/eval.hpp"
#include "prereq/pathgen.hpp"
#include "prereq/service.hpp"
#include "prereq/synthetic.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace prereq;

namespace {

struct Common {
    std::uint64_t seed = 1;
    bool seed_set = false;
    std::string config;
    bool json = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Random seed")->each([&c](const std::string&) { c.seed_set = true; });
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_flag("--json", c.json, "Machine-readable output");
}

Json load_config(const Common& c) { return c.config.empty() ? Json::object() : read_json_file(c.config); }

ExperimentConfig experiment_config(const Common& c) {
    ExperimentConfig cfg = ExperimentConfig::from_json(load_config(c));
    if (c.seed_set) cfg.seed = c.seed;
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

DocumentSet load_corpora(const std::vector<std::string>& paths, Provenance prov) {
    if (paths.empty()) throw Error("at least one --corpus is required");
    DocumentSet set = ingest_documents(paths.front(), prov);
    for (std::size_t i = 1; i < paths.size(); ++i) {
        set = DocumentSet::combine(set, ingest_documents(paths[i], prov));
    }
    return set;
}

ConceptGraph load_graph(const std::string& dir, const std::string& merge) {
    std::vector<std::string> warnings;
    ConceptGraph g = load_graph_dir(dir, parse_merge_mode(merge), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    return g;
}

// ingest ---------------------------------------------------------------------

struct IngestArgs {
    std::string input, provenance = "lecturebank", taxonomy, topics, vocab_out;
    std::size_t min_length = 1;
    bool keep_numbers = false;
};

int run_ingest(const IngestArgs& a, const Common& c) {
    TokenizeConfig tok;
    tok.min_length = a.min_length;
    tok.drop_numbers = !a.keep_numbers;
    const DocumentSet set = ingest_documents(a.input, parse_provenance(a.provenance), tok);
    std::size_t tokens = 0, slides = 0;
    for (const auto& d : set.documents()) {
        tokens += d.tokens.size();
        slides += d.slide_texts.size();
    }
    Json out{{"documents", set.size()}, {"slides", slides}, {"tokens", tokens}, {"skipped", set.skipped()}};
    if (!a.taxonomy.empty() || !a.topics.empty() || !a.vocab_out.empty()) {
        const auto taxonomy = a.taxonomy.empty() ? std::vector<std::string>{} : read_phrase_list(a.taxonomy);
        const auto topics = a.topics.empty() ? std::vector<std::string>{} : read_phrase_list(a.topics);
        const Vocabulary vocab = extract_vocabulary(set, taxonomy, topics);
        out["vocabulary_terms"] = vocab.terms.size();
        if (!a.vocab_out.empty()) {
            std::ostringstream text;
            for (const auto& t : vocab.terms) text << t.phrase << '\t' << to_string(t.origin) << '\n';
            write_text(a.vocab_out, text.str());
        }
    }
    if (c.json) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::cout << "documents: " << set.size() << "\nslides: " << slides << "\ntokens: " << tokens
                  << "\nskipped: " << set.skipped().size() << '\n';
        if (out.contains("vocabulary_terms")) std::cout << "vocabulary terms: " << out["vocabulary_terms"] << '\n';
    }
    return 0;
}

// stats ----------------------------------------------------------------------

struct StatsArgs {
    std::string graph, merge = "intersection", corpus, provenance = "lecturebank";
    std::size_t top = 15;
};

Json corpus_stats_json(const CorpusStats& s) {
    auto row = [](const DomainStats& d) {
        return Json{{"domain", d.domain},           {"courses", d.courses},
                    {"lectures", d.lectures},       {"slides", d.slides},
                    {"tokens", d.tokens},           {"tokens_per_lecture", d.tokens_per_lecture},
                    {"tokens_per_slide", d.tokens_per_slide}};
    };
    Json rows = Json::array();
    for (const auto& d : s.domains) rows.push_back(row(d));
    rows.push_back(row(s.overall));
    return rows;
}

int run_stats(const StatsArgs& a, const Common& c) {
    if (a.graph.empty() && a.corpus.empty()) throw Error("stats needs --graph and/or --corpus");
    Json out = Json::object();
    if (!a.graph.empty()) {
        const ConceptGraph g = load_graph(a.graph, a.merge);
        out = graph_statistics(g, a.top).to_json();
        const std::size_t n = g.size();
        out["ordered_pairs"] = n * (n > 0 ? n - 1 : 0);
        out["negative_pairs"] = n * (n > 0 ? n - 1 : 0) - g.edges().size();
        // Pairwise agreement when the directory holds several annotators.
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(a.graph)) {
            if (e.path().filename().string().rfind("edges_annotator", 0) == 0) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.size() >= 2) {
            const ConceptGraph vertices(read_concepts_tsv(fs::path(a.graph) / "concepts.tsv"), {});
            out["kappa"] = annotator_kappa(g.size(), read_edges_tsv(files[0], vertices), read_edges_tsv(files[1], vertices));
        }
    }
    if (!a.corpus.empty()) out["corpus"] = corpus_stats_json(corpus_stats(ingest_documents(a.corpus, parse_provenance(a.provenance))));
    if (c.json) {
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    if (out.contains("vertices")) {
        std::cout << "vertices: " << out["vertices"] << "\nedges: " << out["edges"] << "\nmutual pairs: "
                  << out["mutual_pair_count"] << "\nisolated: " << out["isolated_count"]
                  << "\nlongest path: " << out["longest_path_length"] << '\n';
        if (out.contains("kappa")) std::cout << "kappa: " << out["kappa"] << '\n';
        std::cout << "top in-degree:\n";
        for (const auto& e : out["top_in_degree"]) std::cout << "  " << e["concept"].get<std::string>() << '\t' << e["degree"] << '\n';
        std::cout << "top out-degree:\n";
        for (const auto& e : out["top_out_degree"]) std::cout << "  " << e["concept"].get<std::string>() << '\t' << e["degree"] << '\n';
    }
    if (out.contains("corpus")) {
        std::cout << "domain\tcourses\tlectures\tslides\ttokens\ttokens/lecture\ttokens/slide\n";
        for (const auto& r : out["corpus"]) {
            std::cout << r["domain"].get<std::string>() << '\t' << r["courses"] << '\t' << r["lectures"] << '\t'
                      << r["slides"] << '\t' << r["tokens"] << '\t' << std::fixed << std::setprecision(1)
                      << r["tokens_per_lecture"].get<double>() << '\t' << r["tokens_per_slide"].get<double>() << '\n';
        }
    }
    return 0;
}

// train-embed ----------------------------------------------------------------

struct TrainEmbedArgs {
    std::vector<std::string> corpus;
    std::string provenance = "lecturebank", graph, merge = "intersection", out_model, out_embeddings;
    int dim = 0, epochs = 0;
};

int run_train_embed(const TrainEmbedArgs& a, const Common& c) {
    const Json conf = load_config(c);
    EmbedConfig cfg = conf.contains("embed") ? conf.at("embed").get<EmbedConfig>() : EmbedConfig{};
    if (c.seed_set) cfg.seed = c.seed;
    if (a.dim > 0) cfg.dim = a.dim;
    if (a.epochs > 0) cfg.epochs = a.epochs;
    const DocumentSet docs = load_corpora(a.corpus, parse_provenance(a.provenance));
    const PvdmModel model = train_pvdm(docs, cfg);
    Json out{{"documents", docs.size()}, {"vocabulary", model.vocab.size()}, {"final_loss", model.epoch_loss.back()}};
    if (!a.out_model.empty()) write_json_file(a.out_model, pvdm_to_json(model));
    if (!a.graph.empty()) {
        const ConceptGraph g = load_graph(a.graph, a.merge);
        const EmbeddingMatrix x = build_concept_matrix(model, g.names());
        out["concepts"] = x.rows();
        if (!a.out_embeddings.empty()) write_json_file(a.out_embeddings, x.to_json());
    }
    if (c.json) std::cout << out.dump(2) << '\n';
    else std::cout << "trained PV-DM on " << docs.size() << " documents, vocabulary " << model.vocab.size()
                   << ", final loss " << model.epoch_loss.back() << '\n';
    return 0;
}

// train-model ----------------------------------------------------------------

struct TrainModelArgs {
    std::string method = "svm", embeddings, graph, merge = "intersection", out, log;
};

int run_train_model(const TrainModelArgs& a, const Common& c) {
    const ExperimentConfig cfg = experiment_config(c);
    const ConceptGraph g = load_graph(a.graph, a.merge);
    const EmbeddingMatrix x = EmbeddingMatrix::from_json(read_json_file(a.embeddings));
    if (x.rows() != g.size()) throw Error("embedding matrix and graph disagree on the number of concepts");
    const Method m = parse_method(a.method);
    Json out{{"method", std::string(to_string(m))}};
    if (m == Method::GAE || m == Method::VGAE) {
        GaeConfig gcfg = cfg.gae;
        gcfg.variational = m == Method::VGAE;
        gcfg.seed = cfg.seed;
        const GraphAEModel model = train_graph_autoencoder(x.x, g, gcfg);
        out["final_loss"] = model.history.back().loss;
        if (!a.out.empty()) write_json_file(a.out, gae_to_json(model));
        if (!a.log.empty()) {
            std::ofstream log(a.log);
            write_training_log(log, model);
        }
    } else {
        const PairDataset all = build_pair_dataset(x, g);
        const auto clf = train_classifier(parse_classifier_kind(a.method),
                                          oversample(all, cfg.seed), cfg.classifier, cfg.seed);
        const Prediction p = predict_pairs(*clf, all.features);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < all.size(); ++i) correct += p.labels[i] == all.labels[i];
        out["pairs"] = all.size();
        out["positives"] = all.positives();
        out["training_accuracy"] = static_cast<double>(correct) / static_cast<double>(all.size());
        if (!a.out.empty()) write_json_file(a.out, classifier_to_json(*clf));
    }
    if (c.json) std::cout << out.dump(2) << '\n';
    else for (const auto& [k, v] : out.items()) std::cout << k << ": " << v << '\n';
    return 0;
}

// evaluate / recover ---------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> methods{"svm"};
    std::vector<std::string> corpus;
    std::string provenance = "lecturebank", graph, merge = "intersection", out, csv, out_dot, out_json;
    int folds = 0;
    int synthetic_concepts = 0;
    bool shuffle_labels = false, predictions = false;
};

struct EvalInputs {
    std::vector<CorpusSetting> settings;
    ConceptGraph graph;
};

EvalInputs eval_inputs(const EvalArgs& a, const ExperimentConfig& cfg) {
    if (a.corpus.empty()) throw Error("at least one --corpus is required (a path, NAME=PATH, or 'synthetic')");
    EvalInputs in;
    bool synthetic = false;
    for (const auto& spec : a.corpus) {
        if (spec == "synthetic") {
            SyntheticSpec s;
            s.seed = cfg.seed;
            if (a.synthetic_concepts > 0) s.concepts = a.synthetic_concepts;
            SyntheticData data = generate_synthetic(s);
            in.graph = std::move(data.graph);
            in.settings.push_back({"synthetic", std::move(data.documents)});
            synthetic = true;
            continue;
        }
        const auto eq = spec.find('=');
        const std::string name = eq == std::string::npos ? fs::path(spec).filename().string() : spec.substr(0, eq);
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        in.settings.push_back({name, ingest_documents(path, parse_provenance(a.provenance))});
    }
    if (synthetic && in.settings.size() > 1) throw Error("the synthetic corpus cannot be mixed with other corpora");
    if (!synthetic) {
        if (a.graph.empty()) throw Error("--graph is required for real corpora");
        in.graph = load_graph(a.graph, a.merge);
    }
    return in;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        if (casefold(n) == "all") return all_methods();
        out.push_back(parse_method(n));
    }
    return out;
}

ExperimentConfig eval_config(const EvalArgs& a, const Common& c) {
    ExperimentConfig cfg = experiment_config(c);
    if (a.folds > 0) cfg.folds = a.folds;
    if (a.shuffle_labels) cfg.shuffle_train_labels = true;
    return cfg;
}

int run_evaluate(const EvalArgs& a, const Common& c) {
    const ExperimentConfig cfg = eval_config(a, c);
    const EvalInputs in = eval_inputs(a, cfg);
    const ExperimentReport report = run_experiment(in.settings, in.graph, parse_methods(a.methods), cfg);
    const std::string json = report.to_json(a.predictions).dump(2) + "\n";
    if (!a.out.empty()) write_text(a.out, json);
    if (!a.csv.empty()) write_text(a.csv, report.to_csv());
    std::cout << (c.json ? json : report.to_csv());
    return 0;
}

int run_recover(const EvalArgs& a, const Common& c) {
    if (a.methods.size() != 1) throw Error("recover takes exactly one --method");
    const ExperimentConfig cfg = eval_config(a, c);
    const EvalInputs in = eval_inputs(a, cfg);
    if (in.settings.size() != 1) throw Error("recover takes exactly one --corpus");
    const ExperimentReport report = run_experiment(in.settings, in.graph, parse_methods(a.methods), cfg);
    std::vector<PairPrediction> preds;
    for (const auto& f : report.settings.front().methods.front().folds) {
        preds.insert(preds.end(), f.predictions.begin(), f.predictions.end());
    }
    const RecoveredGraph r = recover_graph(in.graph, preds);
    if (!a.out_dot.empty()) write_text(a.out_dot, r.dot);
    if (!a.out_json.empty()) write_json_file(a.out_json, r.json);
    if (c.json) std::cout << Json{{"vertex_count", r.vertex_count}, {"edge_count", r.edges.size()}}.dump(2) << '\n';
    else std::cout << "recovered " << r.edges.size() << " edges over " << r.vertex_count << " concepts\n";
    return 0;
}

// path -----------------------------------------------------------------------

struct PathArgs {
    std::string graph, merge = "intersection", target, corpus, mapping;
    std::vector<std::string> known;
    std::size_t max_resources = 5;
    int max_depth = 0;
    bool prune_satisfied = false;
};

int run_path(const PathArgs& a, const Common& c) {
    const ConceptGraph g = load_graph(a.graph, a.merge);
    ClosureOptions opt;
    opt.prune_satisfied = a.prune_satisfied;
    opt.max_depth = a.max_depth;
    LearningPath path = prerequisite_closure(g, a.target, a.known, opt);
    const ResourceIndex index = a.corpus.empty() ? ResourceIndex{} : ResourceIndex(ingest_documents(a.corpus, Provenance::LectureBank));
    const TaxonomyMapping mapping = a.mapping.empty() ? TaxonomyMapping{} : TaxonomyMapping::read_tsv(a.mapping);
    path = attach_resources(std::move(path), index, mapping, a.max_resources);
    if (c.json) {
        std::cout << path.to_json().dump(2) << '\n';
        return 0;
    }
    if (path.explanation) std::cout << *path.explanation << '\n';
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        std::cout << i + 1 << ". " << path.steps[i].concept_name << '\n';
        for (const auto& r : path.steps[i].resources) std::cout << "     " << r.id << "  " << r.path << '\n';
    }
    return 0;
}

// serve ----------------------------------------------------------------------

httplib::Server* g_server = nullptr;

int run_serve(const std::string& host, int port, const Common& c) {
    if (c.config.empty()) throw Error("serve requires --config");
    ServiceConfig cfg = ServiceConfig::from_file(c.config);
    if (c.seed_set) cfg.seed = c.seed;
    if (!host.empty()) cfg.host = host;
    if (port > 0) cfg.port = port;
    Service service;
    httplib::Server server;
    bind_routes(server, service);
    g_server = &server;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    if (!server.bind_to_port(cfg.host, cfg.port)) throw Error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    std::thread loader([&] {
        try {
            service.publish(load_service_state(cfg));
            std::cerr << "artifacts loaded; serving on " << cfg.host << ':' << cfg.port << '\n';
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            server.stop();
        }
    });
    server.listen_after_bind();
    loader.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prerequisite chain learning toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    Common common;

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Read lecture text and report counts");
    c_ingest->add_option("--input", ingest.input, "Corpus directory or JSON-lines manifest")->required();
    c_ingest->add_option("--provenance", ingest.provenance);
    c_ingest->add_option("--min-length", ingest.min_length, "Minimum token length");
    c_ingest->add_flag("--keep-numbers", ingest.keep_numbers);
    c_ingest->add_option("--taxonomy", ingest.taxonomy, "Taxonomy phrase list");
    c_ingest->add_option("--topics", ingest.topics, "Prerequisite topic list");
    c_ingest->add_option("--vocab-out", ingest.vocab_out, "Write extracted vocabulary");
    add_common(c_ingest, common);

    StatsArgs stats;
    auto* c_stats = app.add_subcommand("stats", "Graph analytics and corpus statistics");
    c_stats->add_option("--graph", stats.graph, "Graph directory");
    c_stats->add_option("--merge", stats.merge, "intersection, union or single");
    c_stats->add_option("--top", stats.top, "Ranking length");
    c_stats->add_option("--corpus", stats.corpus, "Corpus directory or manifest");
    c_stats->add_option("--provenance", stats.provenance);
    add_common(c_stats, common);

    TrainEmbedArgs temb;
    auto* c_temb = app.add_subcommand("train-embed", "Train PV-DM and embed the concepts");
    c_temb->add_option("--corpus", temb.corpus, "Corpus directory or manifest (repeatable)")->required();
    c_temb->add_option("--provenance", temb.provenance);
    c_temb->add_option("--graph", temb.graph, "Graph directory whose concepts are embedded");
    c_temb->add_option("--merge", temb.merge);
    c_temb->add_option("--out-model", temb.out_model);
    c_temb->add_option("--out-embeddings", temb.out_embeddings);
    c_temb->add_option("--dim", temb.dim);
    c_temb->add_option("--epochs", temb.epochs);
    add_common(c_temb, common);

    TrainModelArgs tmod;
    auto* c_tmod = app.add_subcommand("train-model", "Train a pair classifier or graph autoencoder on the full graph");
    c_tmod->add_option("--method", tmod.method, "nb, svm, lr, rf, gae or vgae");
    c_tmod->add_option("--embeddings", tmod.embeddings)->required()->check(CLI::ExistingFile);
    c_tmod->add_option("--graph", tmod.graph)->required();
    c_tmod->add_option("--merge", tmod.merge);
    c_tmod->add_option("--out", tmod.out);
    c_tmod->add_option("--log", tmod.log, "Per-epoch JSON-lines log (gae, vgae)");
    add_common(c_tmod, common);

    EvalArgs eval;
    auto add_eval = [&](CLI::App* cmd) {
        cmd->add_option("--method", eval.methods, "Method(s), or 'all'")->take_all();
        cmd->add_option("--corpus", eval.corpus, "PATH, NAME=PATH, or 'synthetic' (repeatable)")->required();
        cmd->add_option("--provenance", eval.provenance);
        cmd->add_option("--graph", eval.graph);
        cmd->add_option("--merge", eval.merge);
        cmd->add_option("--folds", eval.folds);
        cmd->add_option("--synthetic-concepts", eval.synthetic_concepts);
        cmd->add_flag("--shuffle-labels", eval.shuffle_labels, "Label-shuffled control");
        add_common(cmd, common);
    };
    auto* c_eval = app.add_subcommand("evaluate", "Cross-validated prerequisite prediction");
    add_eval(c_eval);
    c_eval->add_option("--out", eval.out, "Write the JSON report");
    c_eval->add_option("--csv", eval.csv, "Write the summary table");
    c_eval->add_flag("--predictions", eval.predictions, "Include per-pair predictions in the report");
    auto* c_rec = app.add_subcommand("recover", "Predicted prerequisite graph from test folds");
    add_eval(c_rec);
    c_rec->add_option("--out-dot", eval.out_dot);
    c_rec->add_option("--out-json", eval.out_json);

    PathArgs path;
    auto* c_path = app.add_subcommand("path", "Learning path to a target concept");
    c_path->add_option("--graph", path.graph)->required();
    c_path->add_option("--merge", path.merge);
    c_path->add_option("--target", path.target)->required();
    c_path->add_option("--known", path.known, "Known concept (repeatable)");
    c_path->add_option("--corpus", path.corpus, "Corpus with taxonomy labels for resources");
    c_path->add_option("--mapping", path.mapping, "Concept to taxonomy override table");
    c_path->add_option("--max-resources", path.max_resources);
    c_path->add_option("--max-depth", path.max_depth);
    c_path->add_flag("--prune-satisfied", path.prune_satisfied);
    add_common(c_path, common);

    std::string host;
    int port = 0;
    auto* c_serve = app.add_subcommand("serve", "HTTP service");
    c_serve->add_option("--host", host);
    c_serve->add_option("--port", port);
    add_common(c_serve, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_ingest) return run_ingest(ingest, common);
        if (*c_stats) return run_stats(stats, common);
        if (*c_temb) return run_train_embed(temb, common);
        if (*c_tmod) return run_train_model(tmod, common);
        if (*c_eval) return run_evaluate(eval, common);
        if (*c_rec) return run_recover(eval, common);
        if (*c_path) return run_path(path, common);
        if (*c_serve) return run_serve(host, port, common);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
