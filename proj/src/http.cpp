#include "repair/http.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include <httplib.h>

#include "repair/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace repair {

namespace {

struct UrlParts {
    std::string host;
    int port;
    std::string path;
};

UrlParts parse_endpoint(const std::string& endpoint) {
    const std::string scheme = "http://";
    if (endpoint.rfind(scheme, 0) != 0) {
        throw std::runtime_error("unsupported endpoint (expected http://host:port/path): " +
                                 endpoint);
    }
    std::string rest = endpoint.substr(scheme.size());
    size_t slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
    size_t colon = authority.find(':');
    UrlParts parts;
    parts.port = 80;
    if (colon == std::string::npos) {
        parts.host = authority;
    } else {
        parts.host = authority.substr(0, colon);
        parts.port = std::stoi(authority.substr(colon + 1));
    }
    parts.path = path;
    if (parts.host.empty()) throw std::runtime_error("endpoint has no host: " + endpoint);
    return parts;
}

}  // namespace

json http_post_json(const HttpSettings& settings, const json& body) {
    UrlParts url = parse_endpoint(settings.endpoint);
    std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv("REPAIR_API_KEY")) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= settings.retries; ++attempt) {
        httplib::Client client(url.host, url.port);
        client.set_connection_timeout(0, settings.timeout_ms * 1000);
        client.set_read_timeout(settings.timeout_ms / 1000, (settings.timeout_ms % 1000) * 1000);

        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            // A malformed body is a format failure; retrying won't help.
            throw std::runtime_error("endpoint " + settings.endpoint +
                                     ": malformed JSON response: " + e.what());
        }
    }
    throw std::runtime_error("endpoint " + settings.endpoint + ": request failed after " +
                             std::to_string(settings.retries + 1) + " attempt(s): " + last_error);
}

RemoteEmbedder::RemoteEmbedder(HttpSettings http, std::string model, int dim)
    : http_(std::move(http)), model_(std::move(model)), dim_(dim) {}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) {
    return embed_batch({text}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
    json body;
    body["model"] = model_;
    body["inputs"] = texts;
    json reply = http_post_json(http_, body);

    if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != texts.size()) {
        throw std::runtime_error("endpoint " + http_.endpoint +
                                 ": response missing \"vectors\" for all inputs");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& raw : reply["vectors"]) {
        EmbeddingVector vec;
        vec.values = raw.get<std::vector<double>>();
        if (dim_ > 0 && vec.dim() != static_cast<size_t>(dim_)) {
            throw std::runtime_error("endpoint " + http_.endpoint + ": expected dim " +
                                     std::to_string(dim_) + ", got " + std::to_string(vec.dim()));
        }
        double norm = 0.0;
        for (double x : vec.values) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            throw std::runtime_error("endpoint " + http_.endpoint + ": zero vector in response");
        }
        for (double& x : vec.values) x /= norm;
        out.push_back(std::move(vec));
    }
    return out;
}

std::string RemoteEmbedder::cache_key_prefix() const {
    return "remote:" + model_ + ":" + std::to_string(dim_);
}

RemoteChatClient::RemoteChatClient(Settings settings) : settings_(std::move(settings)) {
    if (!settings_.cache_dir.empty()) fs::create_directories(settings_.cache_dir);
}

std::string RemoteChatClient::cache_path(const std::string& system, const std::string& user) const {
    std::string key = fnv1a64_hex(settings_.model + "\x1f" +
                                  format_fixed(settings_.temperature, 6) + "\x1f" +
                                  std::to_string(settings_.max_tokens) + "\x1f" + system + "\x1f" +
                                  user);
    return (fs::path(settings_.cache_dir) / (key + ".txt")).string();
}

std::string RemoteChatClient::complete(const std::string& system, const std::string& user) {
    std::string path;
    if (!settings_.cache_dir.empty()) {
        path = cache_path(system, user);
        if (fs::exists(path)) {
            try {
                return read_text_file(path);
            } catch (const std::exception& e) {
                throw std::runtime_error(std::string("chat cache corrupt: ") + e.what());
            }
        }
    }

    json body;
    body["model"] = settings_.model;
    body["messages"] = json::array({json{{"role", "system"}, {"content", system}},
                                    json{{"role", "user"}, {"content", user}}});
    body["temperature"] = settings_.temperature;
    body["max_tokens"] = settings_.max_tokens;

    json reply = http_post_json(settings_.http, body);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw std::runtime_error("endpoint " + settings_.http.endpoint +
                                 ": response has no \"text\" field");
    }
    std::string text = reply["text"].get<std::string>();
    if (!path.empty()) write_text_file(path, text);
    return text;
}

}  // namespace repair
