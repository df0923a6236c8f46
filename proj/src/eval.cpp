#include "repair/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "repair/util.hpp"

using json = nlohmann::json;

namespace repair {

Qrels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qrels file: " + path);

    Qrels qrels;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_whitespace(line);
        if (fields.size() != 4) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected `query_id 0 doc_id gain`");
        }
        int gain;
        try {
            gain = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": gain is not an integer");
        }
        if (gain < 0) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": negative gain");
        }
        auto& for_query = qrels.judgments[fields[0]];
        if (!for_query.emplace(fields[2], gain).second) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": duplicate judgment for (" + fields[0] + ", " + fields[2] +
                                     ")");
        }
    }
    return qrels;
}

namespace {

double dcg_term(int gain, int rank) {  // rank 1-based
    return (std::pow(2.0, static_cast<double>(gain)) - 1.0) /
           std::log2(static_cast<double>(rank) + 1.0);
}

}  // namespace

double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::map<std::string, int>& qrels_for_query, int k) {
    if (k < 1) throw std::runtime_error("ndcg_at_k: k must be >= 1");

    double dcg = 0.0;
    for (size_t r = 0; r < ranking.size() && r < static_cast<size_t>(k); ++r) {
        auto it = qrels_for_query.find(ranking[r]);
        if (it != qrels_for_query.end()) dcg += dcg_term(it->second, static_cast<int>(r) + 1);
    }

    std::vector<int> gains;
    gains.reserve(qrels_for_query.size());
    for (const auto& [_, gain] : qrels_for_query) gains.push_back(gain);
    std::sort(gains.rbegin(), gains.rend());
    double idcg = 0.0;
    for (size_t r = 0; r < gains.size() && r < static_cast<size_t>(k); ++r) {
        idcg += dcg_term(gains[r], static_cast<int>(r) + 1);
    }
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

std::optional<double> recall_at_k(const std::vector<std::string>& ranking,
                                  const std::map<std::string, int>& qrels_for_query, int k) {
    if (k < 1) throw std::runtime_error("recall_at_k: k must be >= 1");

    int relevant = 0;
    for (const auto& [_, gain] : qrels_for_query) {
        if (gain > 0) ++relevant;
    }
    if (relevant == 0) return std::nullopt;

    int found = 0;
    for (size_t r = 0; r < ranking.size() && r < static_cast<size_t>(k); ++r) {
        auto it = qrels_for_query.find(ranking[r]);
        if (it != qrels_for_query.end() && it->second > 0) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(relevant);
}

std::string normalize_answer(const std::string& s) {
    std::string lowered;
    lowered.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        lowered.push_back(static_cast<char>(std::tolower(c)));
    }
    std::string out;
    for (const auto& tok : split_whitespace(lowered)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(const std::string& pred, const std::vector<std::string>& golds) {
    std::string p = normalize_answer(pred);
    for (const auto& gold : golds) {
        if (p == normalize_answer(gold)) return 1;
    }
    return 0;
}

double token_f1(const std::string& pred, const std::vector<std::string>& golds) {
    auto pred_tokens = split_whitespace(normalize_answer(pred));
    double best = 0.0;
    for (const auto& gold : golds) {
        auto gold_tokens = split_whitespace(normalize_answer(gold));
        if (pred_tokens.empty() || gold_tokens.empty()) continue;
        std::unordered_map<std::string, int> counts;
        for (const auto& t : gold_tokens) ++counts[t];
        int overlap = 0;
        for (const auto& t : pred_tokens) {
            auto it = counts.find(t);
            if (it != counts.end() && it->second > 0) {
                --it->second;
                ++overlap;
            }
        }
        if (overlap == 0) continue;
        double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
        double recall = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

std::string generate_answer(const Query& query, const std::vector<Document>& top_docs,
                            ChatBackend& chat) {
    std::string system =
        "You are a question answering assistant. Read the numbered context documents and answer "
        "the question. Answer concisely with a short phrase.";
    std::ostringstream user;
    user << "[Question]\n" << query.text;
    if (!top_docs.empty()) {
        user << "\n\n[Context]\n";
        for (size_t i = 0; i < top_docs.size(); ++i) {
            user << "[" << (i + 1) << "]: " << top_docs[i].text;
            if (i + 1 < top_docs.size()) user << "\n";
        }
    }
    return chat.complete(system, user.str());
}

std::map<std::string, std::vector<std::string>> load_run_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run file: " + path);

    struct Entry {
        int rank;
        std::string doc_id;
    };
    std::map<std::string, std::vector<Entry>> by_query;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_whitespace(line);
        if (fields.size() != 6) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected `query_id Q0 doc_id rank score tag`");
        }
        int rank;
        try {
            rank = std::stoi(fields[3]);
            (void)std::stod(fields[4]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": rank/score not numeric");
        }
        by_query[fields[0]].push_back({rank, fields[2]});
    }

    std::map<std::string, std::vector<std::string>> run;
    for (auto& [qid, entries] : by_query) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.rank < b.rank; });
        auto& ranking = run[qid];
        ranking.reserve(entries.size());
        for (const auto& e : entries) ranking.push_back(e.doc_id);
    }
    return run;
}

namespace {

struct MetricSpec {
    std::string name;  // "ndcg" or "recall"
    int k;
    std::string label;
};

MetricSpec parse_metric(const std::string& spec) {
    size_t at = spec.find('@');
    if (at == std::string::npos) {
        throw std::runtime_error("bad metric \"" + spec + "\" (expected name@k, e.g. ndcg@10)");
    }
    MetricSpec m;
    m.name = spec.substr(0, at);
    m.label = spec;
    try {
        m.k = std::stoi(spec.substr(at + 1));
    } catch (const std::exception&) {
        throw std::runtime_error("bad metric \"" + spec + "\": k is not an integer");
    }
    if (m.name != "ndcg" && m.name != "recall") {
        throw std::runtime_error("unknown metric \"" + m.name + "\" (supported: ndcg, recall)");
    }
    if (m.k < 1) throw std::runtime_error("bad metric \"" + spec + "\": k must be >= 1");
    return m;
}

}  // namespace

EvalReport evaluate_run(const std::map<std::string, std::vector<std::string>>& run,
                        const Qrels& qrels, const std::vector<std::string>& metrics) {
    std::vector<MetricSpec> specs;
    specs.reserve(metrics.size());
    for (const auto& m : metrics) specs.push_back(parse_metric(m));

    EvalReport report;
    report.metrics = metrics;

    static const std::vector<std::string> kEmpty;
    std::map<std::string, std::pair<double, int>> sums;  // metric -> (sum, count)

    for (const auto& [qid, judgments] : qrels.judgments) {
        auto run_it = run.find(qid);
        const std::vector<std::string>& ranking = run_it == run.end() ? kEmpty : run_it->second;
        if (run_it == run.end()) {
            report.warnings.push_back("query " + qid + " missing from run; scored 0");
        }
        for (const auto& spec : specs) {
            if (spec.name == "ndcg") {
                double v = ndcg_at_k(ranking, judgments, spec.k);
                report.per_query[qid][spec.label] = v;
                sums[spec.label].first += v;
                sums[spec.label].second += 1;
            } else {
                auto v = recall_at_k(ranking, judgments, spec.k);
                if (!v) {
                    report.warnings.push_back("query " + qid +
                                              " has no relevant documents; excluded from " +
                                              spec.label);
                    continue;
                }
                report.per_query[qid][spec.label] = *v;
                sums[spec.label].first += *v;
                sums[spec.label].second += 1;
            }
        }
    }
    for (const auto& spec : specs) {
        auto& [sum, count] = sums[spec.label];
        report.mean[spec.label] = count == 0 ? 0.0 : sum / static_cast<double>(count);
    }
    return report;
}

std::string render_report_json(const EvalReport& report) {
    json j;
    j["metrics"] = report.metrics;
    json per_query = json::object();
    for (const auto& [qid, values] : report.per_query) {
        json row = json::object();
        for (const auto& [metric, value] : values) row[metric] = value;
        per_query[qid] = std::move(row);
    }
    j["per_query"] = std::move(per_query);
    json mean = json::object();
    for (const auto& [metric, value] : report.mean) mean[metric] = value;
    j["mean"] = std::move(mean);
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

std::string render_report_table(const EvalReport& report) {
    size_t qid_width = 5;  // "query"
    for (const auto& [qid, _] : report.per_query) qid_width = std::max(qid_width, qid.size());

    std::ostringstream out;
    out << std::left;
    out.width(static_cast<std::streamsize>(qid_width + 2));
    out << "query";
    for (const auto& metric : report.metrics) {
        out.width(static_cast<std::streamsize>(std::max<size_t>(metric.size(), 10) + 2));
        out << metric;
    }
    out << "\n";

    auto row = [&](const std::string& label, const std::map<std::string, double>* values) {
        out.width(static_cast<std::streamsize>(qid_width + 2));
        out << label;
        for (const auto& metric : report.metrics) {
            out.width(static_cast<std::streamsize>(std::max<size_t>(metric.size(), 10) + 2));
            if (values && values->count(metric)) {
                out << format_fixed(values->at(metric), 4);
            } else {
                out << "-";
            }
        }
        out << "\n";
    };
    for (const auto& [qid, values] : report.per_query) row(qid, &values);
    row("mean", &report.mean);
    return out.str();
}

}  // namespace repair
