#pragma once

#include "prereq/embed.hpp"
#include "prereq/gae.hpp"
#include "prereq/graph.hpp"
#include "prereq/pairclf.hpp"
#include "prereq/pathgen.hpp"
#include "prereq/serialize.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace prereq {

struct ServiceConfig {
    std::filesystem::path graph_dir;
    MergeMode merge = MergeMode::Intersection;
    std::filesystem::path embeddings;        // optional EmbeddingMatrix checkpoint
    std::filesystem::path classifier;        // optional pair_classifier checkpoint
    std::filesystem::path corpus;            // optional directory or manifest for resources
    std::filesystem::path taxonomy_mapping;  // optional override table
    std::string host = "127.0.0.1";
    int port = 8080;
    std::uint64_t seed = 1;
    std::size_t max_resources = 5;

    /// Relative paths are resolved against `base_dir`.
    static ServiceConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
    static ServiceConfig from_file(const std::filesystem::path& path);
    Json to_json() const;
};

/// Everything a request may read. Never mutated once published.
struct ServiceState {
    ServiceConfig config;
    ConceptGraph graph;
    Json graph_json;
    std::optional<EmbeddingMatrix> embeddings;
    std::shared_ptr<const PairClassifier> classifier;
    ResourceIndex resources;
    TaxonomyMapping mapping;
};

std::shared_ptr<const ServiceState> load_service_state(const ServiceConfig& config);

struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    Json body;
};

/// Request routing over a swappable state snapshot.
class Service {
public:
    Service() = default;
    explicit Service(std::shared_ptr<const ServiceState> state) : state_(std::move(state)) {}

    void publish(std::shared_ptr<const ServiceState> state);
    std::shared_ptr<const ServiceState> snapshot() const;
    /// Reloads from the current config; keeps the old state if loading fails.
    void reload();

    HttpResponse handle(const HttpRequest& req);

private:
    mutable std::mutex mu_;
    std::shared_ptr<const ServiceState> state_;
};

/// Routes every endpoint of `service` on `server`.
void bind_routes(httplib::Server& server, Service& service);

}  // namespace prereq
