#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace repair {

struct Document {
    std::string id;
    std::string text;
    std::string title;  // may be empty
};

struct Query {
    std::string id;
    std::string text;
};

struct ScoredDoc {
    std::string doc_id;
    double score;
};

/// Loads a line-delimited JSON corpus, one {"id","title"?,"text"} object per
/// line. Blank lines are skipped. Throws on malformed records (message names
/// the line number) and on duplicate ids (message names the id).
std::vector<Document> load_corpus(const std::string& path);

/// Same file shape with {"id","text"}.
std::vector<Query> load_queries(const std::string& path);

/// Lowercased tokens, split on every non-alphanumeric byte, empties dropped.
std::vector<std::string> tokenize(const std::string& text);

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct Posting {
    int doc_index;
    int term_frequency;
};

struct Bm25Index {
    Bm25Params params;
    int doc_count = 0;
    double avg_doc_length = 0.0;
    std::vector<int> doc_lengths;
    std::vector<std::string> doc_ids;                        // by doc_index
    std::unordered_map<std::string, std::vector<Posting>> postings;  // lists sorted by doc_index

    // idf = ln(1 + (N - df + 0.5) / (df + 0.5)); stays positive on tiny corpora.
    double idf(const std::string& term) const;
};

Bm25Index bm25_build(const std::vector<Document>& docs, Bm25Params params = {});

/// Okapi BM25 over the query's token multiset. Results sorted by score
/// descending, ties by ascending doc_id; zero-score documents excluded.
std::vector<ScoredDoc> bm25_search(const Bm25Index& index, const Query& query, int n);

void save_bm25_index(const Bm25Index& index, const std::string& path);
Bm25Index load_bm25_index(const std::string& path);

}  // namespace repair
