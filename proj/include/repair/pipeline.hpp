#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "repair/corpus.hpp"
#include "repair/embedding.hpp"
#include "repair/graph.hpp"
#include "repair/planner.hpp"
#include "repair/rewards.hpp"

namespace repair {

enum class PipelineMode { Repair, PsrOnly, StandardNar };

PipelineMode mode_from_string(const std::string& name);
std::string mode_to_string(PipelineMode mode);

struct PipelineConfig {
    int window_size = 20;  // b: docs per reranker call
    int carry = 10;        // k: top docs carried into the next window
    int total_windows = 9;  // I
    int graph_degree = 16;
    PipelineMode mode = PipelineMode::Repair;
    int con_warmup_windows = 5;  // consistency reward joins after this many windows
    bool reuse_plan = false;     // reuse window 1's plan for all windows
    bool ablate_base = false;
    bool ablate_con = false;
    int first_stage_depth = 100;
    std::optional<int> neighbor_pool_filter;  // restrict expansion candidates to
                                              // the first-stage top-N when set

    void validate() const;  // throws std::runtime_error on violation
};

/// Per-query evolving state, exposed for the refill operations and tests.
struct WindowState {
    int index = 0;
    std::vector<std::string> docs;
    std::unordered_set<std::string> seen;
    std::vector<std::string> demoted;  // latest demotions first
    PreferenceLedger ledger;
    std::vector<Plan> plan_history;
};

struct WindowTrace {
    int index = 0;
    std::vector<std::string> input_ids;
    std::vector<std::string> reranked_ids;
    std::vector<std::string> plan_texts;
    std::vector<StepReward> rewards;
    int selected_step = 0;
    std::string refill_source;  // how this window's fresh docs were found
    std::vector<std::string> refill_ids;
};

struct RunResult {
    std::string query_id;
    std::vector<ScoredDoc> final_ranking;
    std::vector<WindowTrace> trace;
};

struct PipelineDeps {
    const Bm25Index* index = nullptr;
    const CorpusGraph* graph = nullptr;  // optional in psr_only mode
    const std::vector<Document>* corpus = nullptr;
    EmbeddingProvider* embeddings = nullptr;
    RerankerBackend* reranker = nullptr;
    // Test hook: invoked with the index of the window being constructed
    // whenever the corpus graph is consulted.
    std::function<void(int)> graph_access_observer;
};

/// Inputs shared by the refill strategies. `carried` is W'[:k] (the expansion
/// seeds), `need` how many fresh docs the next window wants.
struct RefillInputs {
    const CorpusGraph* graph = nullptr;
    std::vector<std::string> carried;
    const std::unordered_set<std::string>* seen = nullptr;
    const std::vector<std::string>* first_stage = nullptr;
    int need = 0;
    std::optional<int> neighbor_pool_filter;
};

/// Next unseen first-stage docs, in first-stage order.
std::vector<std::string> first_stage_refill(const RefillInputs& in);

/// Indiscriminate neighborhood expansion: unseen neighbors of the carried
/// docs ranked by graph edge similarity. Falls back to first-stage refill
/// when no unseen neighbor exists. `source` reports which path was taken.
std::vector<std::string> standard_nar_refill(const RefillInputs& in, std::string* source = nullptr);

/// Step-adaptive expansion: unseen neighbors of the carried docs are pooled
/// with the upcoming first-stage candidates and ranked by cosine similarity
/// to the selected reasoning step; the top `need` fill the window.
std::vector<std::string> step_adaptive_refill(
    const RefillInputs& in, const std::string& step_text, EmbeddingProvider& embeddings,
    const std::unordered_map<std::string, const Document*>& doc_lookup,
    std::string* source = nullptr);

/// Runs the full per-query loop: sliding-window rerank, ledger update, step
/// scoring, and mode-dependent refill, over `total_windows` windows. Expansion
/// (repair and standard_nar modes) applies only to windows past ceil(I/2).
/// The final ranking is the last reranked window, then the demotion history
/// (latest first), then the untouched first-stage tail; scores descend from
/// window_size.
RunResult run_query(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps);

struct WorkloadOptions {
    std::string run_file_path;  // empty: no run file
    std::string run_tag = "run";
    std::string trace_dir;  // empty: no traces
    int workers = 1;
    bool verbose = false;  // per-query progress lines on stdout
};

struct WorkloadOutcome {
    std::vector<RunResult> results;  // successes, in input query order
    std::vector<std::pair<std::string, std::string>> failures;  // (query_id, error)
};

/// Independent per-query runs; failures are collected without aborting the
/// remaining queries.
WorkloadOutcome run_workload(const std::vector<Query>& queries, const PipelineConfig& cfg,
                             const PipelineDeps& deps, const WorkloadOptions& options = {});

/// Classic whitespace-separated run format:
/// `query_id Q0 doc_id rank score run_tag`, rank 1-based, score descending.
void write_run_file(const std::vector<RunResult>& results, const std::string& path,
                    const std::string& run_tag);

void write_trace_file(const RunResult& result, const std::string& path);

}  // namespace repair
