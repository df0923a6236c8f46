#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "repair/chat.hpp"
#include "repair/corpus.hpp"
#include "repair/embedding.hpp"

namespace repair {

struct ReasoningStep {
    int index = 0;  // 1-based, contiguous within a plan
    std::string text;
};

struct Plan {
    std::vector<ReasoningStep> steps;
    int window_index = 0;
};

struct ParseDiagnostics {
    int dropped_out_of_range = 0;
    int duplicates_dropped = 0;
    int appended = 0;
    bool ranking_section_found = false;
    bool plan_synthesized = false;
};

struct RerankOutput {
    Plan plan;
    std::vector<std::string> ranking;  // permutation of the window's doc ids
    std::string raw_text;              // backend transcript for audit
    ParseDiagnostics diagnostics;
};

struct PromptPair {
    std::string system;
    std::string user;
};

/// Planning prompt. The system text instructs the model to emit a reasoning
/// trace followed by a bracketed document ranking; the user text lists the
/// query and the window documents as "[i]: {text}" with 1-based indices.
/// `max_doc_chars` > 0 truncates each document's text in the prompt.
PromptPair build_prompt(const Query& query, const std::vector<Document>& window,
                        int max_doc_chars = 0);

/// Parses a (possibly malformed) backend transcript into a plan and a
/// ranking, then repairs the ranking into a permutation of `window`:
///   1. in-window indices map to doc ids, indices outside 1..|window| drop;
///   2. first occurrence of each doc wins, later duplicates drop;
///   3. every unmentioned window doc is appended in original window order;
///   4. if no steps parsed, a one-step plan holding `query_text` is
///      synthesized.
/// Never throws on bad input; diagnostics record what was repaired.
RerankOutput parse_output(const std::string& raw, const std::vector<std::string>& window,
                          const std::string& query_text);

/// Produces the raw transcript for one window. Implementations must emit the
/// trace/ranking format that parse_output expects.
class RerankerBackend {
public:
    virtual ~RerankerBackend() = default;
    virtual std::string rerank_raw(const Query& query, const std::vector<Document>& window) = 0;
};

/// Deterministic test backend: a per-query (or default) script fixes the plan
/// text and the ranking rule, and the transcript is synthesized from it.
struct OracleScript {
    enum class Rule {
        ByCosineToStep,    // rank window docs by cosine to steps[cosine_step-1]
        FixedPermutation,  // listed doc ids first, unlisted keep window order
        WindowOrder,
    };

    std::vector<std::string> steps;  // empty means "use the query text as step 1"
    Rule rule = Rule::ByCosineToStep;
    int cosine_step = 1;
    std::vector<std::string> fixed_order;
};

class ScriptedOracleReranker : public RerankerBackend {
public:
    explicit ScriptedOracleReranker(EmbeddingProvider& embeddings);

    void set_default_script(OracleScript script);
    void set_script(const std::string& query_id, OracleScript script);

    std::string rerank_raw(const Query& query, const std::vector<Document>& window) override;

private:
    const OracleScript& script_for(const std::string& query_id) const;

    EmbeddingProvider* embeddings_;
    OracleScript default_script_;
    std::unordered_map<std::string, OracleScript> scripts_;
};

/// Remote LLM backend: one chat call per window through the shared chat
/// client (temperature 0, content-hash cached).
class LlmReranker : public RerankerBackend {
public:
    LlmReranker(ChatBackend& chat, int max_doc_chars = 0);

    std::string rerank_raw(const Query& query, const std::vector<Document>& window) override;

private:
    ChatBackend* chat_;
    int max_doc_chars_;
};

/// One plan-and-rerank call: backend transcript -> parse -> repaired output.
/// The result's ranking is always a permutation of the window's ids.
RerankOutput plan_and_rerank(const Query& query, const std::vector<Document>& window,
                             RerankerBackend& backend);

}  // namespace repair
