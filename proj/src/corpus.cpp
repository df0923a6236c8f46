#include "repair/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "repair/util.hpp"

using json = nlohmann::json;

namespace repair {

namespace {

json parse_record(const std::string& line, const std::string& path, size_t line_no) {
    json rec;
    try {
        rec = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed record: " + e.what());
    }
    if (!rec.is_object()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed record: not a JSON object");
    }
    return rec;
}

std::string require_string_field(const json& rec, const char* field, const std::string& path,
                                 size_t line_no) {
    if (!rec.contains(field) || !rec[field].is_string()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed record: missing string field \"" + field + "\"");
    }
    return rec[field].get<std::string>();
}

}  // namespace

std::vector<Document> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);

    std::vector<Document> docs;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = parse_record(line, path, line_no);
        Document doc;
        doc.id = require_string_field(rec, "id", path, line_no);
        doc.text = require_string_field(rec, "text", path, line_no);
        if (rec.contains("title") && rec["title"].is_string()) {
            doc.title = rec["title"].get<std::string>();
        }
        if (doc.id.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed record: empty id");
        }
        if (trim(doc.text).empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed record: empty text");
        }
        if (!seen_ids.insert(doc.id).second) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": duplicate doc id \"" + doc.id + "\"");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Query> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open queries file: " + path);

    std::vector<Query> queries;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = parse_record(line, path, line_no);
        Query q;
        q.id = require_string_field(rec, "id", path, line_no);
        q.text = require_string_field(rec, "text", path, line_no);
        if (q.id.empty() || trim(q.text).empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed record: empty id or text");
        }
        if (!seen_ids.insert(q.id).second) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": duplicate query id \"" + q.id + "\"");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

double Bm25Index::idf(const std::string& term) const {
    auto it = postings.find(term);
    double df = it == postings.end() ? 0.0 : static_cast<double>(it->second.size());
    double n = static_cast<double>(doc_count);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

Bm25Index bm25_build(const std::vector<Document>& docs, Bm25Params params) {
    if (docs.empty()) throw std::runtime_error("bm25_build: empty corpus");
    if (params.k1 <= 0.0) throw std::runtime_error("bm25_build: k1 must be > 0");
    if (params.b < 0.0 || params.b > 1.0) throw std::runtime_error("bm25_build: b must be in [0,1]");

    Bm25Index index;
    index.params = params;
    index.doc_count = static_cast<int>(docs.size());
    index.doc_lengths.reserve(docs.size());
    index.doc_ids.reserve(docs.size());

    long long total_length = 0;
    for (size_t d = 0; d < docs.size(); ++d) {
        auto tokens = tokenize(docs[d].text);
        index.doc_lengths.push_back(static_cast<int>(tokens.size()));
        index.doc_ids.push_back(docs[d].id);
        total_length += static_cast<long long>(tokens.size());

        std::unordered_map<std::string, int> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            index.postings[term].push_back({static_cast<int>(d), count});
        }
    }
    index.avg_doc_length = static_cast<double>(total_length) / static_cast<double>(docs.size());

    // Docs are scanned in order, so lists are already sorted by doc_index;
    // keep the sort as a guard for future build paths.
    for (auto& [term, list] : index.postings) {
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b) { return a.doc_index < b.doc_index; });
    }
    return index;
}

std::vector<ScoredDoc> bm25_search(const Bm25Index& index, const Query& query, int n) {
    if (n < 1) throw std::runtime_error("bm25_search: n must be >= 1");

    std::vector<double> scores(static_cast<size_t>(index.doc_count), 0.0);
    for (const auto& term : tokenize(query.text)) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        double idf = index.idf(term);
        for (const Posting& p : it->second) {
            double tf = static_cast<double>(p.term_frequency);
            double dl = static_cast<double>(index.doc_lengths[static_cast<size_t>(p.doc_index)]);
            double norm = index.params.k1 *
                          (1.0 - index.params.b + index.params.b * dl / index.avg_doc_length);
            scores[static_cast<size_t>(p.doc_index)] += idf * tf * (index.params.k1 + 1.0) / (tf + norm);
        }
    }

    std::vector<ScoredDoc> hits;
    for (size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] > 0.0) hits.push_back({index.doc_ids[d], scores[d]});
    }
    std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > static_cast<size_t>(n)) hits.resize(static_cast<size_t>(n));
    return hits;
}

void save_bm25_index(const Bm25Index& index, const std::string& path) {
    json j;
    j["k1"] = index.params.k1;
    j["b"] = index.params.b;
    j["doc_count"] = index.doc_count;
    j["avg_doc_length"] = index.avg_doc_length;
    j["doc_lengths"] = index.doc_lengths;
    j["doc_ids"] = index.doc_ids;
    json post = json::object();
    for (const auto& [term, list] : index.postings) {
        json entries = json::array();
        for (const Posting& p : list) entries.push_back({p.doc_index, p.term_frequency});
        post[term] = std::move(entries);
    }
    j["postings"] = std::move(post);
    write_text_file(path, j.dump());
}

Bm25Index load_bm25_index(const std::string& path) {
    json j = json::parse(read_text_file(path));
    Bm25Index index;
    index.params.k1 = j.at("k1").get<double>();
    index.params.b = j.at("b").get<double>();
    index.doc_count = j.at("doc_count").get<int>();
    index.avg_doc_length = j.at("avg_doc_length").get<double>();
    index.doc_lengths = j.at("doc_lengths").get<std::vector<int>>();
    index.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
    for (const auto& [term, entries] : j.at("postings").items()) {
        std::vector<Posting> list;
        for (const auto& e : entries) {
            list.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        }
        index.postings[term] = std::move(list);
    }

    if (index.doc_lengths.size() != static_cast<size_t>(index.doc_count) ||
        index.doc_ids.size() != static_cast<size_t>(index.doc_count)) {
        throw std::runtime_error("BM25 index corrupt: " + path + " (doc counts disagree)");
    }
    for (const auto& [term, list] : index.postings) {
        for (size_t i = 0; i < list.size(); ++i) {
            if (list[i].doc_index < 0 || list[i].doc_index >= index.doc_count ||
                (i > 0 && list[i - 1].doc_index >= list[i].doc_index)) {
                throw std::runtime_error("BM25 index corrupt: " + path + " (postings for \"" +
                                         term + "\")");
            }
        }
    }
    return index;
}

}  // namespace repair
