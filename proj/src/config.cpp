#include "repair/config.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "repair/util.hpp"

using json = nlohmann::json;

namespace repair {

namespace {

void apply_override(json& root, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::runtime_error("bad override \"" + assignment + "\" (expected key=value)");
    }
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    json* node = &root;
    size_t start = 0;
    while (true) {
        size_t dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos
                                                                      : dot - start);
        if (part.empty()) throw std::runtime_error("bad override key \"" + key + "\"");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
    if (j.contains(name)) out = j.at(name).get<T>();
}

void check_known_keys(const json& j, const std::vector<std::string>& known,
                      const std::string& section) {
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::runtime_error("unknown config key \"" + section + key + "\"");
        }
    }
}

}  // namespace

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
    for (const auto& assignment : overrides) apply_override(j, assignment);

    check_known_keys(j, {"paths", "pipeline", "embedder", "reranker", "chat", "bm25", "seed",
                         "workers", "run_tag"},
                     "");

    ExperimentConfig cfg;
    if (j.contains("paths")) {
        const json& p = j["paths"];
        check_known_keys(p, {"corpus", "queries", "qrels", "index", "graph", "cache_dir",
                             "output_dir"},
                         "paths.");
        read_field(p, "corpus", cfg.paths.corpus);
        read_field(p, "queries", cfg.paths.queries);
        read_field(p, "qrels", cfg.paths.qrels);
        read_field(p, "index", cfg.paths.index);
        read_field(p, "graph", cfg.paths.graph);
        read_field(p, "cache_dir", cfg.paths.cache_dir);
        read_field(p, "output_dir", cfg.paths.output_dir);
    }
    if (j.contains("pipeline")) {
        const json& p = j["pipeline"];
        check_known_keys(p,
                         {"window_size", "carry", "total_windows", "graph_degree", "mode",
                          "con_warmup_windows", "reuse_plan", "ablate_base", "ablate_con",
                          "first_stage_depth", "neighbor_pool_filter"},
                         "pipeline.");
        read_field(p, "window_size", cfg.pipeline.window_size);
        read_field(p, "carry", cfg.pipeline.carry);
        read_field(p, "total_windows", cfg.pipeline.total_windows);
        read_field(p, "graph_degree", cfg.pipeline.graph_degree);
        if (p.contains("mode")) cfg.pipeline.mode = mode_from_string(p["mode"].get<std::string>());
        read_field(p, "con_warmup_windows", cfg.pipeline.con_warmup_windows);
        read_field(p, "reuse_plan", cfg.pipeline.reuse_plan);
        read_field(p, "ablate_base", cfg.pipeline.ablate_base);
        read_field(p, "ablate_con", cfg.pipeline.ablate_con);
        read_field(p, "first_stage_depth", cfg.pipeline.first_stage_depth);
        if (p.contains("neighbor_pool_filter") && !p["neighbor_pool_filter"].is_null()) {
            cfg.pipeline.neighbor_pool_filter = p["neighbor_pool_filter"].get<int>();
        }
    }
    if (j.contains("embedder")) {
        const json& e = j["embedder"];
        check_known_keys(e, {"backend", "endpoint", "model", "dim", "timeout_ms", "retries"},
                         "embedder.");
        read_field(e, "backend", cfg.embedder.backend);
        read_field(e, "endpoint", cfg.embedder.endpoint);
        read_field(e, "model", cfg.embedder.model);
        read_field(e, "dim", cfg.embedder.dim);
        read_field(e, "timeout_ms", cfg.embedder.timeout_ms);
        read_field(e, "retries", cfg.embedder.retries);
        if (cfg.embedder.backend != "mock" && cfg.embedder.backend != "remote") {
            throw std::runtime_error("embedder.backend must be mock or remote");
        }
    }
    if (j.contains("reranker")) {
        const json& r = j["reranker"];
        check_known_keys(r,
                         {"backend", "endpoint", "model", "timeout_ms", "retries", "max_tokens",
                          "max_doc_chars", "script_path"},
                         "reranker.");
        read_field(r, "backend", cfg.reranker.backend);
        read_field(r, "endpoint", cfg.reranker.endpoint);
        read_field(r, "model", cfg.reranker.model);
        read_field(r, "timeout_ms", cfg.reranker.timeout_ms);
        read_field(r, "retries", cfg.reranker.retries);
        read_field(r, "max_tokens", cfg.reranker.max_tokens);
        read_field(r, "max_doc_chars", cfg.reranker.max_doc_chars);
        read_field(r, "script_path", cfg.reranker.script_path);
        if (cfg.reranker.backend != "scripted" && cfg.reranker.backend != "remote") {
            throw std::runtime_error("reranker.backend must be scripted or remote");
        }
    }
    if (j.contains("chat")) {
        const json& c = j["chat"];
        check_known_keys(c, {"endpoint", "model", "timeout_ms", "retries", "max_tokens"},
                         "chat.");
        read_field(c, "endpoint", cfg.chat.endpoint);
        read_field(c, "model", cfg.chat.model);
        read_field(c, "timeout_ms", cfg.chat.timeout_ms);
        read_field(c, "retries", cfg.chat.retries);
        read_field(c, "max_tokens", cfg.chat.max_tokens);
    }
    if (j.contains("bm25")) {
        const json& b = j["bm25"];
        check_known_keys(b, {"k1", "b"}, "bm25.");
        read_field(b, "k1", cfg.bm25.k1);
        read_field(b, "b", cfg.bm25.b);
    }
    read_field(j, "seed", cfg.seed);
    read_field(j, "workers", cfg.workers);
    read_field(j, "run_tag", cfg.run_tag);
    if (cfg.workers < 1) throw std::runtime_error("workers must be >= 1");
    return cfg;
}

}  // namespace repair
