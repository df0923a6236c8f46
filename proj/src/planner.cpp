#include "repair/planner.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_set>

#include "repair/util.hpp"

namespace repair {

namespace {

const char* kSystemPrompt =
    "You are an AI assistant that analyzes complex questions and identifies which documents "
    "best support answering them.\n"
    "Given a user's query and a set of documents, your task is to:\n"
    "1. Generate a reasoning trace, thinking step by step about what knowledge or types of "
    "information are necessary to answer the query. These should be abstract but specific "
    "enough to guide document selection.\n"
    "2. Select and rank at least 10 documents that best support the reasoning steps. Consider "
    "how each document contributes to the reasoning process. Order them from most to least "
    "useful using > between document IDs (e.g., [3] > [7]).\n"
    "\n"
    "Use the following format:\n"
    "\n"
    "[Reasoning Trace]\n"
    "Step 1: <First reasoning step>\n"
    "Step 2: <Second reasoning step>\n"
    "...\n"
    "Step N: <Final reasoning step>\n"
    "\n"
    "[Document Ranking]\n"
    "[9] > [5] > [6] > ... > [12]\n"
    "\n"
    "Only produce the output in the format shown above.";

const char* kRankingMarker = "[Document Ranking]";

// "Step <digits> : <text>" with flexible whitespace; returns false otherwise.
bool parse_step_line(const std::string& line, std::string& text_out) {
    size_t i = 0;
    auto skip_ws = [&] {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    };
    skip_ws();
    if (line.compare(i, 4, "Step") != 0) return false;
    i += 4;
    size_t digits_start = i;
    skip_ws();
    if (i == digits_start) return false;  // require a space after "Step"
    digits_start = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == digits_start) return false;
    skip_ws();
    if (i >= line.size() || line[i] != ':') return false;
    ++i;
    text_out = trim(line.substr(i));
    return true;
}

// All "[<digits>]" groups at or after `from`.
std::vector<long long> bracketed_integers(const std::string& raw, size_t from) {
    std::vector<long long> out;
    size_t i = from;
    while (i < raw.size()) {
        if (raw[i] != '[') {
            ++i;
            continue;
        }
        size_t j = i + 1;
        long long value = 0;
        bool any = false;
        bool overflow = false;
        while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) {
            if (value > 100000000) overflow = true;  // way past any window size
            value = value * 10 + (raw[j] - '0');
            any = true;
            ++j;
        }
        if (any && j < raw.size() && raw[j] == ']') {
            out.push_back(overflow ? -1 : value);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

std::string clip(const std::string& text, int max_chars) {
    if (max_chars > 0 && text.size() > static_cast<size_t>(max_chars)) {
        return text.substr(0, static_cast<size_t>(max_chars));
    }
    return text;
}

}  // namespace

PromptPair build_prompt(const Query& query, const std::vector<Document>& window,
                        int max_doc_chars) {
    std::ostringstream user;
    user << "[Query]\n" << query.text << "\n\n[Documents]\n";
    for (size_t i = 0; i < window.size(); ++i) {
        user << "[" << (i + 1) << "]: " << clip(window[i].text, max_doc_chars);
        if (i + 1 < window.size()) user << "\n";
    }
    return {kSystemPrompt, user.str()};
}

RerankOutput parse_output(const std::string& raw, const std::vector<std::string>& window,
                          const std::string& query_text) {
    RerankOutput out;
    out.raw_text = raw;

    // Plan: every "Step N: ..." line, renumbered 1..M.
    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line)) {
        std::string text;
        if (parse_step_line(line, text) && !text.empty()) {
            out.plan.steps.push_back({static_cast<int>(out.plan.steps.size()) + 1, text});
        }
    }
    if (out.plan.steps.empty()) {
        out.plan.steps.push_back({1, query_text});
        out.diagnostics.plan_synthesized = true;
    }

    // Ranking: bracketed indices after the marker.
    std::vector<long long> indices;
    size_t marker = raw.find(kRankingMarker);
    if (marker != std::string::npos) {
        out.diagnostics.ranking_section_found = true;
        indices = bracketed_integers(raw, marker + std::string(kRankingMarker).size());
    }

    std::unordered_set<std::string> used;
    for (long long idx : indices) {
        if (idx < 1 || idx > static_cast<long long>(window.size())) {
            ++out.diagnostics.dropped_out_of_range;
            continue;
        }
        const std::string& doc_id = window[static_cast<size_t>(idx - 1)];
        if (!used.insert(doc_id).second) {
            ++out.diagnostics.duplicates_dropped;
            continue;
        }
        out.ranking.push_back(doc_id);
    }
    for (const auto& doc_id : window) {
        if (!used.count(doc_id)) {
            out.ranking.push_back(doc_id);
            ++out.diagnostics.appended;
        }
    }
    return out;
}

ScriptedOracleReranker::ScriptedOracleReranker(EmbeddingProvider& embeddings)
    : embeddings_(&embeddings) {}

void ScriptedOracleReranker::set_default_script(OracleScript script) {
    default_script_ = std::move(script);
}

void ScriptedOracleReranker::set_script(const std::string& query_id, OracleScript script) {
    scripts_[query_id] = std::move(script);
}

const OracleScript& ScriptedOracleReranker::script_for(const std::string& query_id) const {
    auto it = scripts_.find(query_id);
    return it == scripts_.end() ? default_script_ : it->second;
}

std::string ScriptedOracleReranker::rerank_raw(const Query& query,
                                               const std::vector<Document>& window) {
    const OracleScript& script = script_for(query.id);
    std::vector<std::string> steps = script.steps;
    if (steps.empty()) steps.push_back(query.text);

    std::vector<size_t> order(window.size());
    for (size_t i = 0; i < window.size(); ++i) order[i] = i;

    switch (script.rule) {
        case OracleScript::Rule::WindowOrder:
            break;
        case OracleScript::Rule::ByCosineToStep: {
            size_t step_idx = static_cast<size_t>(
                std::clamp<int>(script.cosine_step, 1, static_cast<int>(steps.size())) - 1);
            const EmbeddingVector& step_vec = embeddings_->for_text(steps[step_idx]);
            std::vector<double> sims(window.size());
            for (size_t i = 0; i < window.size(); ++i) {
                sims[i] = cosine_sim(step_vec, embeddings_->for_doc(window[i]));
            }
            std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                if (sims[a] != sims[b]) return sims[a] > sims[b];
                return window[a].id < window[b].id;
            });
            break;
        }
        case OracleScript::Rule::FixedPermutation: {
            std::vector<size_t> picked;
            std::unordered_set<size_t> taken;
            for (const auto& wanted : script.fixed_order) {
                for (size_t i = 0; i < window.size(); ++i) {
                    if (window[i].id == wanted && !taken.count(i)) {
                        picked.push_back(i);
                        taken.insert(i);
                        break;
                    }
                }
            }
            for (size_t i = 0; i < window.size(); ++i) {
                if (!taken.count(i)) picked.push_back(i);
            }
            order = std::move(picked);
            break;
        }
    }

    std::ostringstream raw;
    raw << "[Reasoning Trace]\n";
    for (size_t s = 0; s < steps.size(); ++s) {
        raw << "Step " << (s + 1) << ": " << steps[s] << "\n";
    }
    raw << "\n[Document Ranking]\n";
    for (size_t i = 0; i < order.size(); ++i) {
        if (i > 0) raw << " > ";
        raw << "[" << (order[i] + 1) << "]";
    }
    raw << "\n";
    return raw.str();
}

LlmReranker::LlmReranker(ChatBackend& chat, int max_doc_chars)
    : chat_(&chat), max_doc_chars_(max_doc_chars) {}

std::string LlmReranker::rerank_raw(const Query& query, const std::vector<Document>& window) {
    PromptPair prompt = build_prompt(query, window, max_doc_chars_);
    return chat_->complete(prompt.system, prompt.user);
}

RerankOutput plan_and_rerank(const Query& query, const std::vector<Document>& window,
                             RerankerBackend& backend) {
    if (window.empty()) throw std::runtime_error("plan_and_rerank: empty window");
    std::vector<std::string> ids;
    ids.reserve(window.size());
    for (const auto& doc : window) ids.push_back(doc.id);
    return parse_output(backend.rerank_raw(query, window), ids, query.text);
}

}  // namespace repair
