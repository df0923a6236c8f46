#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repair/pipeline.hpp"

namespace repair {

struct PathSettings {
    std::string corpus;
    std::string queries;
    std::string qrels;
    std::string index;      // persisted BM25 index (output of `index`)
    std::string graph;      // persisted corpus graph (output of `graph`)
    std::string cache_dir;  // embeddings/ and chat/ live under here
    std::string output_dir;
};

struct EmbedderSettings {
    std::string backend = "mock";  // mock | remote
    std::string endpoint;
    std::string model;
    int dim = 256;
    int timeout_ms = 30000;
    int retries = 2;
};

struct RerankerSettings {
    std::string backend = "scripted";  // scripted | remote
    std::string endpoint;
    std::string model;
    int timeout_ms = 60000;
    int retries = 2;
    int max_tokens = 2048;
    int max_doc_chars = 0;    // 0: no truncation in prompts
    std::string script_path;  // optional scripted-backend script file
};

struct ChatGenSettings {
    std::string endpoint;
    std::string model;
    int timeout_ms = 60000;
    int retries = 2;
    int max_tokens = 512;
};

struct ExperimentConfig {
    PathSettings paths;
    PipelineConfig pipeline;
    EmbedderSettings embedder;
    RerankerSettings reranker;
    ChatGenSettings chat;
    Bm25Params bm25;
    std::uint64_t seed = 0;  // recorded in outputs for provenance
    int workers = 1;
    std::string run_tag = "repair";
};

/// Loads a JSON config file and applies `key=value` overrides (dotted paths,
/// e.g. "pipeline.mode=psr_only"; values parsed as JSON when possible, else
/// taken as strings). Unknown keys are rejected.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

}  // namespace repair
