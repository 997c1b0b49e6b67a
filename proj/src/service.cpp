#include "prereq/service.hpp"

#include <httplib.h>

#include <iostream>

namespace prereq {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const Json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    fs::path p = j.at(key).get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
}

std::string path_string(const fs::path& p) { return p.empty() ? std::string() : p.string(); }

HttpResponse error(int status, const std::string& message) { return {status, Json{{"error", message}}}; }

Json concept_list(const ConceptGraph& g) {
    Json out = Json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const int v = static_cast<int>(i);
        out.push_back({{"index", v}, {"name", g.name(v)}, {"in_degree", g.in_degree(v)}, {"out_degree", g.out_degree(v)}});
    }
    return out;
}

const std::string* query_param(const HttpRequest& req, const std::string& key) {
    const auto it = req.query.find(key);
    return it == req.query.end() ? nullptr : &it->second;
}

HttpResponse handle_predict(const ServiceState& s, const HttpRequest& req) {
    const auto* src = query_param(req, "src");
    const auto* tgt = query_param(req, "tgt");
    if (!src || !tgt) return error(400, "query parameters 'src' and 'tgt' are required");
    const auto u = s.graph.find(*src);
    if (!u) return error(404, "unknown concept '" + *src + "'");
    const auto v = s.graph.find(*tgt);
    if (!v) return error(404, "unknown concept '" + *tgt + "'");
    if (!s.classifier || !s.embeddings) return error(503, "no pair classifier loaded");
    const Matrix row = pair_features(s.embeddings->x, *u, *v).transpose();
    const Prediction p = predict_pairs(*s.classifier, row);
    return {200, Json{{"src", s.graph.name(*u)},
                      {"tgt", s.graph.name(*v)},
                      {"score", p.scores.front()},
                      {"label", p.labels.front() == 1},
                      {"method", std::string(to_string(s.classifier->kind()))}}};
}

HttpResponse handle_path(const ServiceState& s, const HttpRequest& req) {
    Json body;
    try {
        body = Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        return error(400, std::string("malformed JSON body: ") + e.what());
    }
    if (!body.is_object() || !body.contains("target") || !body.at("target").is_string()) {
        return error(400, "body must be an object with a string 'target'");
    }
    std::vector<std::string> known;
    if (body.contains("known")) {
        const auto& k = body.at("known");
        if (!k.is_array()) return error(400, "'known' must be an array of strings");
        for (const auto& e : k) {
            if (!e.is_string()) return error(400, "'known' must be an array of strings");
            known.push_back(e.get<std::string>());
        }
    }
    ClosureOptions opt;
    std::size_t max_resources = s.config.max_resources;
    try {
        opt.prune_satisfied = body.value("prune_satisfied", false);
        opt.max_depth = body.value("max_depth", 0);
        max_resources = body.value("max_resources", max_resources);
    } catch (const Json::exception& e) {
        return error(400, std::string("bad option: ") + e.what());
    }
    if (opt.max_depth < 0) return error(400, "'max_depth' must be >= 0");
    try {
        LearningPath path = prerequisite_closure(s.graph, body.at("target").get<std::string>(), known, opt);
        path = attach_resources(std::move(path), s.resources, s.mapping, max_resources);
        return {200, path.to_json()};
    } catch (const UnknownConcept& e) {
        return error(404, e.what());
    }
}

HttpResponse handle_resources(const ServiceState& s, const HttpRequest& req) {
    const auto* c = query_param(req, "concept");
    if (!c) return error(400, "query parameter 'concept' is required");
    const auto v = s.graph.find(*c);
    if (!v) return error(404, "unknown concept '" + *c + "'");
    const std::string& name = s.graph.name(*v);
    const auto docs = concept_resources(name, s.resources, s.mapping);
    Json res = Json::array();
    for (const auto& r : docs) res.push_back({{"id", r.id}, {"path", r.path}});
    bool mapped = false;
    for (const auto& label : s.mapping.labels_for(name)) mapped = mapped || s.resources.find(label);
    return {200, Json{{"concept", name}, {"resources", res}, {"unmapped", !mapped}}};
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const Json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw Error("service config must be a JSON object");
    ServiceConfig c;
    c.graph_dir = resolve(j, "graph", base_dir);
    if (c.graph_dir.empty()) throw Error("service config: 'graph' is required");
    if (j.contains("merge")) c.merge = parse_merge_mode(j.at("merge").get<std::string>());
    c.embeddings = resolve(j, "embeddings", base_dir);
    c.classifier = resolve(j, "classifier", base_dir);
    c.corpus = resolve(j, "corpus", base_dir);
    c.taxonomy_mapping = resolve(j, "taxonomy_mapping", base_dir);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.seed = j.value("seed", c.seed);
    c.max_resources = j.value("max_resources", c.max_resources);
    if (c.classifier.empty() != c.embeddings.empty()) {
        throw Error("service config: 'classifier' and 'embeddings' must be given together");
    }
    return c;
}

ServiceConfig ServiceConfig::from_file(const fs::path& path) {
    return from_json(read_json_file(path), path.parent_path());
}

Json ServiceConfig::to_json() const {
    return Json{{"graph", path_string(graph_dir)},
                {"embeddings", path_string(embeddings)},
                {"classifier", path_string(classifier)},
                {"corpus", path_string(corpus)},
                {"taxonomy_mapping", path_string(taxonomy_mapping)},
                {"host", host},
                {"port", port},
                {"seed", seed},
                {"max_resources", max_resources}};
}

std::shared_ptr<const ServiceState> load_service_state(const ServiceConfig& config) {
    auto s = std::make_shared<ServiceState>();
    s->config = config;
    std::vector<std::string> warnings;
    s->graph = load_graph_dir(config.graph_dir, config.merge, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    s->graph_json = graph_to_json(s->graph);
    s->graph_json["stats"] = graph_statistics(s->graph).to_json();
    if (!config.embeddings.empty()) {
        s->embeddings = EmbeddingMatrix::from_json(read_json_file(config.embeddings));
        if (s->embeddings->concepts.size() != s->graph.size()) {
            throw Error("embeddings cover " + std::to_string(s->embeddings->concepts.size()) + " concepts but the graph has " +
                        std::to_string(s->graph.size()));
        }
        for (std::size_t i = 0; i < s->graph.size(); ++i) {
            if (casefold(s->embeddings->concepts[i]) != casefold(s->graph.name(static_cast<int>(i)))) {
                throw Error("embedding row " + std::to_string(i) + " is '" + s->embeddings->concepts[i] +
                            "' but the graph has '" + s->graph.name(static_cast<int>(i)) + "'");
            }
        }
        s->classifier = classifier_from_json(read_json_file(config.classifier));
        if (s->classifier->width() != static_cast<std::size_t>(2 * s->embeddings->x.cols())) {
            throw Error("classifier width does not match the embedding dimension");
        }
    }
    if (!config.corpus.empty()) {
        s->resources = ResourceIndex(ingest_documents(config.corpus, Provenance::LectureBank));
    }
    if (!config.taxonomy_mapping.empty()) s->mapping = TaxonomyMapping::read_tsv(config.taxonomy_mapping);
    return s;
}

void Service::publish(std::shared_ptr<const ServiceState> state) {
    std::lock_guard lock(mu_);
    state_ = std::move(state);
}

std::shared_ptr<const ServiceState> Service::snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
}

void Service::reload() {
    const auto current = snapshot();
    if (!current) throw Error("reload: no configuration loaded");
    publish(load_service_state(current->config));
}

HttpResponse Service::handle(const HttpRequest& req) {
    const auto s = snapshot();
    if (!s) return error(503, "artifacts are not loaded yet");
    try {
        if (req.method == "GET" && req.path == "/health") return {200, Json{{"status", "ok"}}};
        if (req.method == "GET" && req.path == "/concepts") return {200, Json{{"concepts", concept_list(s->graph)}}};
        if (req.method == "GET" && req.path == "/graph") return {200, s->graph_json};
        if (req.method == "GET" && req.path == "/predict") return handle_predict(*s, req);
        if (req.method == "GET" && req.path == "/resources") return handle_resources(*s, req);
        if (req.method == "POST" && req.path == "/path") return handle_path(*s, req);
        if (req.method == "POST" && req.path == "/reload") {
            reload();
            return {200, Json{{"status", "reloaded"}}};
        }
        return error(404, "no route for " + req.method + " " + req.path);
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

void bind_routes(httplib::Server& server, Service& service) {
    auto adapt = [&service](const httplib::Request& in, httplib::Response& out) {
        HttpRequest req;
        req.method = in.method;
        req.path = in.path;
        for (const auto& [k, v] : in.params) req.query.emplace(k, v);
        req.body = in.body;
        const HttpResponse r = service.handle(req);
        out.status = r.status;
        out.set_content(r.body.dump(), "application/json");
    };
    for (const char* route : {"/health", "/concepts", "/graph", "/predict", "/resources"}) server.Get(route, adapt);
    for (const char* route : {"/path", "/reload"}) server.Post(route, adapt);
    server.set_error_handler([](const httplib::Request& in, httplib::Response& out) {
        if (!out.body.empty()) return;
        out.set_content(Json{{"error", "no route for " + in.method + " " + in.path}}.dump(), "application/json");
    });
}

}  // namespace prereq
