#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "repair/corpus.hpp"
#include "repair/embedding.hpp"
#include "repair/planner.hpp"

namespace repair {

double sigmoid(double x);

/// Pairwise above-counts accumulated from full-window reranked lists within
/// one query's run. count(p, q) is how often p was ranked above q.
struct PreferenceLedger {
    std::map<std::pair<std::string, std::string>, int> above_counts;
    int windows_recorded = 0;

    int count(const std::string& p, const std::string& q) const;
};

/// Adds one reranked list: every ordered pair (earlier, later) is counted once.
/// Throws on duplicate ids in the ranking.
void ledger_record(PreferenceLedger& ledger, const std::vector<std::string>& ranking);

/// Consensus preference e^{c_pq} / (e^{c_pq} + e^{c_qp}) with absent counts
/// read as 0. Computed so that bt_probability(p,q) + bt_probability(q,p) is
/// exactly 1. Throws when p == q.
double bt_probability(const PreferenceLedger& ledger, const std::string& p, const std::string& q);

/// Negative mean sigmoid similarity between a step and the ranked window;
/// always in (-1, 0). A value near 0 marks an under-covered step.
double base_reward(const EmbeddingVector& step, const std::vector<EmbeddingVector>& window);
double base_reward(const ReasoningStep& step, const std::vector<Document>& ranked_window,
                   EmbeddingProvider& embeddings);

/// Window doc ids sorted by cosine to the step, descending, ties by ascending
/// doc id: the ranking this step alone would induce.
std::vector<std::string> step_induced_ranking(
    const EmbeddingVector& step, const std::vector<std::pair<std::string, EmbeddingVector>>& window);
std::vector<std::string> step_induced_ranking(const ReasoningStep& step,
                                              const std::vector<Document>& window,
                                              EmbeddingProvider& embeddings);

/// Mean consensus probability over all ordered pairs induced by the step's
/// ranking; requires at least 2 docs.
double consistency_reward(const PreferenceLedger& ledger,
                          const std::vector<std::string>& step_ranking);

struct StepReward {
    int step_index = 0;
    double r_base = 0.0;
    double r_con = 0.0;
    double r_total = 0.0;
    bool con_active = false;
};

struct ScoreOptions {
    bool con_active = false;  // consistency term participates only after warm-up
    bool ablate_base = false;
};

/// One StepReward per plan step; r_total is the unweighted sum of the parts.
std::vector<StepReward> score_steps(const Plan& plan, const std::vector<Document>& ranked_window,
                                    const PreferenceLedger& ledger, EmbeddingProvider& embeddings,
                                    const ScoreOptions& options = {});

/// 1-based step_index of the maximum r_total; ties go to the smallest index.
int select_step(const std::vector<StepReward>& rewards);

}  // namespace repair
