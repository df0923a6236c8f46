#include "repair/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace repair {

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

int PreferenceLedger::count(const std::string& p, const std::string& q) const {
    auto it = above_counts.find({p, q});
    return it == above_counts.end() ? 0 : it->second;
}

void ledger_record(PreferenceLedger& ledger, const std::vector<std::string>& ranking) {
    std::unordered_set<std::string> distinct(ranking.begin(), ranking.end());
    if (distinct.size() != ranking.size()) {
        throw std::runtime_error("ledger_record: ranking contains duplicate ids");
    }
    for (size_t i = 0; i < ranking.size(); ++i) {
        for (size_t j = i + 1; j < ranking.size(); ++j) {
            ++ledger.above_counts[{ranking[i], ranking[j]}];
        }
    }
    ++ledger.windows_recorded;
}

double bt_probability(const PreferenceLedger& ledger, const std::string& p, const std::string& q) {
    if (p == q) throw std::runtime_error("bt_probability: identical documents");
    // Evaluate the canonical direction once and derive the other as its
    // complement, so the two directions sum to exactly 1. The count
    // difference form keeps large counts from overflowing exp().
    const std::string& lo = p < q ? p : q;
    const std::string& hi = p < q ? q : p;
    double forward = sigmoid(static_cast<double>(ledger.count(lo, hi) - ledger.count(hi, lo)));
    return p < q ? forward : 1.0 - forward;
}

double base_reward(const EmbeddingVector& step, const std::vector<EmbeddingVector>& window) {
    if (window.empty()) throw std::runtime_error("base_reward: empty window");
    double sum = 0.0;
    for (const auto& doc : window) sum += sigmoid(cosine_sim(step, doc));
    return -sum / static_cast<double>(window.size());
}

double base_reward(const ReasoningStep& step, const std::vector<Document>& ranked_window,
                   EmbeddingProvider& embeddings) {
    std::vector<EmbeddingVector> vecs;
    vecs.reserve(ranked_window.size());
    for (const auto& doc : ranked_window) vecs.push_back(embeddings.for_doc(doc));
    return base_reward(embeddings.for_text(step.text), vecs);
}

std::vector<std::string> step_induced_ranking(
    const EmbeddingVector& step,
    const std::vector<std::pair<std::string, EmbeddingVector>>& window) {
    if (window.empty()) throw std::runtime_error("step_induced_ranking: empty window");
    std::vector<size_t> order(window.size());
    std::vector<double> sims(window.size());
    for (size_t i = 0; i < window.size(); ++i) {
        order[i] = i;
        sims[i] = cosine_sim(step, window[i].second);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return window[a].first < window[b].first;
    });
    std::vector<std::string> ranked;
    ranked.reserve(window.size());
    for (size_t i : order) ranked.push_back(window[i].first);
    return ranked;
}

std::vector<std::string> step_induced_ranking(const ReasoningStep& step,
                                              const std::vector<Document>& window,
                                              EmbeddingProvider& embeddings) {
    std::vector<std::pair<std::string, EmbeddingVector>> pairs;
    pairs.reserve(window.size());
    for (const auto& doc : window) pairs.emplace_back(doc.id, embeddings.for_doc(doc));
    return step_induced_ranking(embeddings.for_text(step.text), pairs);
}

double consistency_reward(const PreferenceLedger& ledger,
                          const std::vector<std::string>& step_ranking) {
    if (step_ranking.size() < 2) {
        throw std::runtime_error("consistency_reward: need at least 2 documents");
    }
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < step_ranking.size(); ++i) {
        for (size_t j = i + 1; j < step_ranking.size(); ++j) {
            sum += bt_probability(ledger, step_ranking[i], step_ranking[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

std::vector<StepReward> score_steps(const Plan& plan, const std::vector<Document>& ranked_window,
                                    const PreferenceLedger& ledger, EmbeddingProvider& embeddings,
                                    const ScoreOptions& options) {
    if (plan.steps.empty()) throw std::runtime_error("score_steps: empty plan");

    std::vector<StepReward> rewards;
    rewards.reserve(plan.steps.size());
    for (const auto& step : plan.steps) {
        StepReward r;
        r.step_index = step.index;
        r.r_base = options.ablate_base ? 0.0 : base_reward(step, ranked_window, embeddings);
        if (options.con_active && ranked_window.size() >= 2) {
            r.r_con = consistency_reward(ledger,
                                         step_induced_ranking(step, ranked_window, embeddings));
            r.con_active = true;
        }
        r.r_total = r.r_base + r.r_con;
        rewards.push_back(r);
    }
    return rewards;
}

int select_step(const std::vector<StepReward>& rewards) {
    if (rewards.empty()) throw std::runtime_error("select_step: no rewards");
    size_t best = 0;
    for (size_t i = 1; i < rewards.size(); ++i) {
        if (rewards[i].r_total > rewards[best].r_total) best = i;
    }
    return rewards[best].step_index;
}

}  // namespace repair
