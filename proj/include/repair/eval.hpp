#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repair/chat.hpp"
#include "repair/corpus.hpp"

namespace repair {

/// Relevance judgments: query_id -> doc_id -> gain (>= 0).
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;
};

/// Whitespace-separated `query_id 0 doc_id gain` lines.
Qrels load_qrels(const std::string& path);

/// Exponential-gain DCG: sum of (2^gain - 1) / log2(rank + 1) over the top k,
/// normalized by the ideal ordering of the judged gains. 0 when the query has
/// no relevant document.
double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::map<std::string, int>& qrels_for_query, int k);

/// Fraction of relevant (gain > 0) docs in the top k. Empty when the query
/// has no relevant document (recall is undefined there).
std::optional<double> recall_at_k(const std::vector<std::string>& ranking,
                                  const std::map<std::string, int>& qrels_for_query, int k);

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_answer(const std::string& s);

int exact_match(const std::string& pred, const std::vector<std::string>& golds);

/// Max over golds of the harmonic mean of token precision/recall on
/// normalized token multisets; 0 when either side is empty.
double token_f1(const std::string& pred, const std::vector<std::string>& golds);

/// One chat call with a fixed QA prompt: the question plus the enumerated
/// context documents. Caching is whatever the backend provides.
std::string generate_answer(const Query& query, const std::vector<Document>& top_docs,
                            ChatBackend& chat);

/// query_id -> doc ids ordered by rank. Throws on malformed lines, naming the
/// line number.
std::map<std::string, std::vector<std::string>> load_run_file(const std::string& path);

struct EvalReport {
    std::vector<std::string> metrics;  // e.g. {"ndcg@10", "recall@100"}
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, double> mean;
    std::vector<std::string> warnings;
};

/// Scores every judged query under each requested metric ("ndcg@K" or
/// "recall@K"). Queries missing from the run score 0 (with a warning);
/// queries without any relevant doc are excluded from recall averages.
EvalReport evaluate_run(const std::map<std::string, std::vector<std::string>>& run,
                        const Qrels& qrels, const std::vector<std::string>& metrics);

std::string render_report_json(const EvalReport& report);
std::string render_report_table(const EvalReport& report);

}  // namespace repair
