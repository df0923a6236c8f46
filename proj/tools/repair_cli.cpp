// Operator surface: index / graph / run / eval subcommands around the
// retrieval pipeline. Exit codes: 0 ok, 1 user error, 2 internal error.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "repair/config.hpp"
#include "repair/corpus.hpp"
#include "repair/embedding.hpp"
#include "repair/eval.hpp"
#include "repair/graph.hpp"
#include "repair/http.hpp"
#include "repair/pipeline.hpp"
#include "repair/planner.hpp"
#include "repair/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace repair;

namespace {

struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what,
                  const std::string& hint = "") {
    if (path.empty()) {
        throw UserError(what + " path is not configured" + (hint.empty() ? "" : "; " + hint));
    }
    if (!fs::exists(path)) {
        throw UserError(what + " not found: " + path + (hint.empty() ? "" : " (" + hint + ")"));
    }
}

std::string default_path(const std::string& configured, const std::string& output_dir,
                         const std::string& filename) {
    if (!configured.empty()) return configured;
    return (fs::path(output_dir.empty() ? "." : output_dir) / filename).string();
}

std::shared_ptr<Embedder> make_embedder(const ExperimentConfig& cfg) {
    if (cfg.embedder.backend == "mock") {
        return std::make_shared<MockEmbedder>(cfg.embedder.dim);
    }
    HttpSettings http;
    http.endpoint = cfg.embedder.endpoint;
    http.timeout_ms = cfg.embedder.timeout_ms;
    http.retries = cfg.embedder.retries;
    return std::make_shared<RemoteEmbedder>(http, cfg.embedder.model, cfg.embedder.dim);
}

std::string embedding_cache_dir(const ExperimentConfig& cfg) {
    return (fs::path(cfg.paths.cache_dir.empty() ? "cache" : cfg.paths.cache_dir) / "embeddings")
        .string();
}

std::string chat_cache_dir(const ExperimentConfig& cfg) {
    return (fs::path(cfg.paths.cache_dir.empty() ? "cache" : cfg.paths.cache_dir) / "chat")
        .string();
}

OracleScript::Rule rule_from_string(const std::string& name) {
    if (name == "by-cosine-to-step") return OracleScript::Rule::ByCosineToStep;
    if (name == "fixed-permutation") return OracleScript::Rule::FixedPermutation;
    if (name == "window-order") return OracleScript::Rule::WindowOrder;
    throw UserError("unknown oracle rule \"" + name +
                    "\" (expected by-cosine-to-step, fixed-permutation, or window-order)");
}

OracleScript script_from_json(const json& j) {
    OracleScript script;
    if (j.contains("steps")) script.steps = j["steps"].get<std::vector<std::string>>();
    if (j.contains("rule")) script.rule = rule_from_string(j["rule"].get<std::string>());
    if (j.contains("step")) script.cosine_step = j["step"].get<int>();
    if (j.contains("order")) script.fixed_order = j["order"].get<std::vector<std::string>>();
    return script;
}

std::unique_ptr<ScriptedOracleReranker> make_scripted_reranker(const ExperimentConfig& cfg,
                                                               EmbeddingProvider& provider) {
    auto reranker = std::make_unique<ScriptedOracleReranker>(provider);
    if (!cfg.reranker.script_path.empty()) {
        require_file(cfg.reranker.script_path, "reranker script");
        json j = json::parse(read_text_file(cfg.reranker.script_path));
        if (j.contains("default")) reranker->set_default_script(script_from_json(j["default"]));
        if (j.contains("queries")) {
            for (const auto& [qid, entry] : j["queries"].items()) {
                reranker->set_script(qid, script_from_json(entry));
            }
        }
    }
    return reranker;
}

int cmd_index(const ExperimentConfig& cfg, bool no_cache) {
    require_file(cfg.paths.corpus, "corpus file");
    if (!cfg.paths.output_dir.empty()) fs::create_directories(cfg.paths.output_dir);

    std::string index_path = default_path(cfg.paths.index, cfg.paths.output_dir,
                                          "bm25_index.json");
    std::string meta_path = index_path + ".meta.json";
    std::string corpus_hash = fnv1a64_hex(read_text_file(cfg.paths.corpus));

    json meta;
    meta["corpus_hash"] = corpus_hash;
    meta["k1"] = cfg.bm25.k1;
    meta["b"] = cfg.bm25.b;

    std::vector<Document> docs = load_corpus(cfg.paths.corpus);
    if (docs.empty()) throw UserError("corpus is empty: " + cfg.paths.corpus);

    bool index_fresh = false;
    if (!no_cache && fs::exists(index_path) && fs::exists(meta_path)) {
        try {
            index_fresh = json::parse(read_text_file(meta_path)) == meta;
        } catch (const std::exception&) {
            index_fresh = false;
        }
    }
    if (index_fresh) {
        std::cout << "index up to date: " << index_path << "\n";
    } else {
        Bm25Index index = bm25_build(docs, cfg.bm25);
        fs::create_directories(fs::path(index_path).parent_path().empty()
                                   ? "."
                                   : fs::path(index_path).parent_path().string());
        save_bm25_index(index, index_path);
        write_text_file(meta_path, meta.dump());
        std::cout << "indexed " << index.doc_count << " docs, " << index.postings.size()
                  << " terms -> " << index_path << "\n";
    }

    DiskCachedEmbedder cached(make_embedder(cfg), embedding_cache_dir(cfg));
    cached.set_refresh(no_cache);
    size_t computed = 0;
    std::vector<std::string> batch;
    auto flush = [&] {
        if (batch.empty()) return;
        cached.embed_batch(batch);
        computed += batch.size();
        batch.clear();
    };
    for (const auto& doc : docs) {
        if (!no_cache && fs::exists(cached.cache_path_for(doc.text))) continue;
        batch.push_back(doc.text);
        if (batch.size() >= 64) flush();
    }
    flush();
    std::cout << "embeddings: " << computed << " computed, " << (docs.size() - computed)
              << " already cached\n";
    return 0;
}

int cmd_graph(const ExperimentConfig& cfg) {
    require_file(cfg.paths.corpus, "corpus file");
    std::vector<Document> docs = load_corpus(cfg.paths.corpus);
    if (docs.empty()) throw UserError("corpus is empty: " + cfg.paths.corpus);

    DiskCachedEmbedder cached(make_embedder(cfg), embedding_cache_dir(cfg),
                              /*require_cached=*/true);
    for (const auto& doc : docs) {
        if (!fs::exists(cached.cache_path_for(doc.text))) {
            throw UserError("embedding for doc \"" + doc.id +
                            "\" is not cached; run the `index` subcommand first");
        }
    }

    std::unordered_map<std::string, EmbeddingVector> embeddings;
    embeddings.reserve(docs.size());
    for (const auto& doc : docs) embeddings[doc.id] = cached.embed(doc.text);

    CorpusGraph graph = build_graph(docs, embeddings, cfg.pipeline.graph_degree, cfg.workers);
    std::string graph_path = default_path(cfg.paths.graph, cfg.paths.output_dir, "graph.jsonl");
    if (!cfg.paths.output_dir.empty()) fs::create_directories(cfg.paths.output_dir);
    save_graph(graph, graph_path);
    std::cout << "graph: " << docs.size() << " docs, degree " << cfg.pipeline.graph_degree
              << " -> " << graph_path << "\n";
    return 0;
}

int cmd_run(const ExperimentConfig& cfg, const std::optional<std::string>& mode_override,
            bool no_cache, bool no_traces) {
    ExperimentConfig eff = cfg;
    try {
        if (mode_override) eff.pipeline.mode = mode_from_string(*mode_override);
        eff.pipeline.validate();
    } catch (const std::exception& e) {
        throw UserError(e.what());
    }

    require_file(eff.paths.corpus, "corpus file");
    require_file(eff.paths.queries, "queries file");
    std::string index_path = default_path(eff.paths.index, eff.paths.output_dir,
                                          "bm25_index.json");
    require_file(index_path, "BM25 index", "run the `index` subcommand first");

    std::vector<Document> docs = load_corpus(eff.paths.corpus);
    std::vector<Query> queries = load_queries(eff.paths.queries);
    Bm25Index index = load_bm25_index(index_path);

    CorpusGraph graph;
    bool have_graph = false;
    if (eff.pipeline.mode != PipelineMode::PsrOnly) {
        std::string graph_path = default_path(eff.paths.graph, eff.paths.output_dir,
                                              "graph.jsonl");
        require_file(graph_path, "corpus graph", "run the `graph` subcommand first");
        graph = load_graph(graph_path);
        have_graph = true;
    }

    auto backend = make_embedder(eff);
    DiskCachedEmbedder cached(backend, embedding_cache_dir(eff));
    EmbeddingProvider provider(cached);

    std::unique_ptr<RerankerBackend> reranker;
    std::unique_ptr<RemoteChatClient> chat;
    if (eff.reranker.backend == "scripted") {
        reranker = make_scripted_reranker(eff, provider);
    } else {
        RemoteChatClient::Settings settings;
        settings.http.endpoint = eff.reranker.endpoint;
        settings.http.timeout_ms = eff.reranker.timeout_ms;
        settings.http.retries = eff.reranker.retries;
        settings.model = eff.reranker.model;
        settings.max_tokens = eff.reranker.max_tokens;
        if (!no_cache) settings.cache_dir = chat_cache_dir(eff);
        chat = std::make_unique<RemoteChatClient>(settings);
        reranker = std::make_unique<LlmReranker>(*chat, eff.reranker.max_doc_chars);
    }

    PipelineDeps deps;
    deps.index = &index;
    deps.graph = have_graph ? &graph : nullptr;
    deps.corpus = &docs;
    deps.embeddings = &provider;
    deps.reranker = reranker.get();

    std::string out_dir = eff.paths.output_dir.empty() ? "." : eff.paths.output_dir;
    fs::create_directories(out_dir);
    WorkloadOptions options;
    options.run_file_path = (fs::path(out_dir) / "run.txt").string();
    options.run_tag = eff.run_tag;
    if (!no_traces) options.trace_dir = (fs::path(out_dir) / "traces").string();
    options.workers = eff.workers;
    options.verbose = true;

    WorkloadOutcome outcome = run_workload(queries, eff.pipeline, deps, options);

    json meta;
    meta["seed"] = eff.seed;
    meta["mode"] = mode_to_string(eff.pipeline.mode);
    meta["run_tag"] = eff.run_tag;
    meta["workers"] = eff.workers;
    meta["queries_ok"] = outcome.results.size();
    meta["queries_failed"] = outcome.failures.size();
    write_text_file((fs::path(out_dir) / "run_meta.json").string(), meta.dump(2) + "\n");

    std::cout << "run file: " << options.run_file_path << " (" << outcome.results.size()
              << " queries";
    if (!outcome.failures.empty()) std::cout << ", " << outcome.failures.size() << " failed";
    std::cout << ")\n";
    for (const auto& [qid, error] : outcome.failures) {
        std::cerr << "query " << qid << " failed: " << error << "\n";
    }
    return outcome.failures.empty() ? 0 : 2;
}

int cmd_eval(const std::string& run_path, const std::string& qrels_path,
             std::vector<std::string> metrics, const std::string& out_path) {
    require_file(run_path, "run file");
    require_file(qrels_path, "qrels file");
    if (metrics.empty()) metrics = {"ndcg@10", "recall@100"};

    EvalReport report;
    try {
        auto run = load_run_file(run_path);
        Qrels qrels = load_qrels(qrels_path);
        report = evaluate_run(run, qrels, metrics);
    } catch (const std::exception& e) {
        throw UserError(e.what());
    }

    std::cout << render_report_table(report);
    for (const auto& warning : report.warnings) std::cerr << "warning: " << warning << "\n";
    if (!out_path.empty()) {
        write_text_file(out_path, render_report_json(report));
        std::cout << "report: " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Plan-adaptive retrieval pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::string> mode_override;
    bool no_cache = false;
    bool no_traces = false;
    std::string run_path, qrels_path, out_path;
    std::vector<std::string> metrics;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config JSON")->required();
        sub->add_option("--set", overrides, "override a config key, e.g. pipeline.mode=repair");
    };

    CLI::App* index_cmd = app.add_subcommand("index", "build the BM25 index and embedding cache");
    add_config_opts(index_cmd);
    index_cmd->add_flag("--no-cache", no_cache, "recompute instead of reusing caches");

    CLI::App* graph_cmd = app.add_subcommand("graph", "build the corpus k-NN graph");
    add_config_opts(graph_cmd);

    CLI::App* run_cmd = app.add_subcommand("run", "run the retrieval pipeline over the queries");
    add_config_opts(run_cmd);
    run_cmd->add_option("--mode", [&](const std::vector<std::string>& vals) {
        mode_override = vals.front();
        return true;
    }, "override pipeline mode (repair | psr_only | standard_nar)");
    run_cmd->add_flag("--no-cache", no_cache, "bypass the chat response cache");
    run_cmd->add_flag("--no-traces", no_traces, "skip per-query trace files");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a run file against qrels");
    eval_cmd->add_option("--run", run_path, "run file")->required();
    eval_cmd->add_option("--qrels", qrels_path, "qrels file")->required();
    eval_cmd->add_option("--metric", metrics, "metric spec (ndcg@K or recall@K), repeatable");
    eval_cmd->add_option("--out", out_path, "write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        ExperimentConfig cfg;
        if (index_cmd->parsed() || graph_cmd->parsed() || run_cmd->parsed()) {
            require_file(config_path, "config file");
            try {
                cfg = load_config(config_path, overrides);
            } catch (const std::exception& e) {
                throw UserError(e.what());
            }
        }
        if (index_cmd->parsed()) return cmd_index(cfg, no_cache);
        if (graph_cmd->parsed()) return cmd_graph(cfg);
        if (run_cmd->parsed()) return cmd_run(cfg, mode_override, no_cache, no_traces);
        if (eval_cmd->parsed()) return cmd_eval(run_path, qrels_path, metrics, out_path);
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
