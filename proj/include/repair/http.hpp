#pragma once

#include <string>

#include <json.hpp>

#include "repair/chat.hpp"
#include "repair/embedding.hpp"

namespace repair {

struct HttpSettings {
    std::string endpoint;  // e.g. http://host:port/path
    int timeout_ms = 30000;
    int retries = 2;  // additional attempts after the first
};

/// POST `body` as JSON to the endpoint and parse the JSON reply. Transport
/// and format failures throw with the endpoint and cause in the message;
/// transport failures are retried `retries` times first.
nlohmann::json http_post_json(const HttpSettings& settings, const nlohmann::json& body);

/// Embedding service client. Wire contract: request {"model", "inputs": [str]},
/// response {"vectors": [[real]]}; vectors are L2-normalized on receipt.
class RemoteEmbedder : public Embedder {
public:
    RemoteEmbedder(HttpSettings http, std::string model, int dim);

    EmbeddingVector embed(const std::string& text) override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    std::string cache_key_prefix() const override;

private:
    HttpSettings http_;
    std::string model_;
    int dim_;
};

/// Chat service client. Request {"model", "messages": [{role, content}],
/// "temperature", "max_tokens"}; the response carries one "text" field.
/// Decoding is pinned to temperature 0 and responses are cached by content
/// hash, so identical requests are free and reruns deterministic.
class RemoteChatClient : public ChatBackend {
public:
    struct Settings {
        HttpSettings http;
        std::string model;
        double temperature = 0.0;
        int max_tokens = 2048;
        std::string cache_dir;  // empty disables caching
    };

    explicit RemoteChatClient(Settings settings);

    std::string complete(const std::string& system, const std::string& user) override;

private:
    std::string cache_path(const std::string& system, const std::string& user) const;

    Settings settings_;
};

}  // namespace repair
