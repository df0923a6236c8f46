#include "repair/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "repair/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace repair {

PipelineMode mode_from_string(const std::string& name) {
    if (name == "repair") return PipelineMode::Repair;
    if (name == "psr_only") return PipelineMode::PsrOnly;
    if (name == "standard_nar") return PipelineMode::StandardNar;
    throw std::runtime_error("unknown pipeline mode \"" + name +
                             "\" (expected repair, psr_only, or standard_nar)");
}

std::string mode_to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::Repair: return "repair";
        case PipelineMode::PsrOnly: return "psr_only";
        case PipelineMode::StandardNar: return "standard_nar";
    }
    return "repair";
}

void PipelineConfig::validate() const {
    if (carry < 1 || carry >= window_size) {
        throw std::runtime_error("pipeline config: need 1 <= carry < window_size");
    }
    if (total_windows < 1) throw std::runtime_error("pipeline config: total_windows must be >= 1");
    int min_depth = window_size + (total_windows - 1) * (window_size - carry);
    if (first_stage_depth < min_depth) {
        throw std::runtime_error("pipeline config: first_stage_depth must be >= " +
                                 std::to_string(min_depth) + " for the configured windows");
    }
    if (con_warmup_windows < 0) {
        throw std::runtime_error("pipeline config: con_warmup_windows must be >= 0");
    }
    if (graph_degree < 1) throw std::runtime_error("pipeline config: graph_degree must be >= 1");
    if (neighbor_pool_filter && *neighbor_pool_filter < 0) {
        throw std::runtime_error("pipeline config: neighbor_pool_filter must be >= 0");
    }
}

namespace {

// Windows past ceil(I/2) are built by expansion instead of the first stage.
bool is_expansion_window(int target_window, int total_windows) {
    return target_window > (total_windows + 1) / 2;
}

std::vector<NeighborEdge> unseen_neighbors(const RefillInputs& in) {
    if (in.graph == nullptr || in.carried.empty()) return {};
    std::vector<NeighborEdge> nbrs = neighbors(*in.graph, in.carried, *in.seen);
    if (in.neighbor_pool_filter) {
        size_t top_n = static_cast<size_t>(*in.neighbor_pool_filter);
        std::unordered_set<std::string> pool;
        for (size_t i = 0; i < in.first_stage->size() && i < top_n; ++i) {
            pool.insert((*in.first_stage)[i]);
        }
        std::erase_if(nbrs, [&](const NeighborEdge& e) { return !pool.count(e.id); });
    }
    return nbrs;
}

}  // namespace

std::vector<std::string> first_stage_refill(const RefillInputs& in) {
    std::vector<std::string> out;
    for (const auto& doc_id : *in.first_stage) {
        if (static_cast<int>(out.size()) >= in.need) break;
        if (!in.seen->count(doc_id)) out.push_back(doc_id);
    }
    return out;
}

std::vector<std::string> standard_nar_refill(const RefillInputs& in, std::string* source) {
    std::vector<NeighborEdge> nbrs = unseen_neighbors(in);
    if (nbrs.empty()) {
        if (source) *source = "first_stage";
        return first_stage_refill(in);
    }
    if (source) *source = "graph_nar";
    std::vector<std::string> out;
    for (const auto& edge : nbrs) {
        if (static_cast<int>(out.size()) >= in.need) break;
        out.push_back(edge.id);
    }
    return out;
}

std::vector<std::string> step_adaptive_refill(
    const RefillInputs& in, const std::string& step_text, EmbeddingProvider& embeddings,
    const std::unordered_map<std::string, const Document*>& doc_lookup, std::string* source) {
    std::vector<NeighborEdge> nbrs = unseen_neighbors(in);
    if (nbrs.empty()) {
        // With nothing to expand this degenerates to the plain first-stage
        // schedule, which keeps the psr_only equivalence exact.
        if (source) *source = "first_stage";
        return first_stage_refill(in);
    }

    std::vector<std::string> pool;
    std::unordered_set<std::string> in_pool;
    for (const auto& edge : nbrs) {
        if (in_pool.insert(edge.id).second) pool.push_back(edge.id);
    }
    for (const auto& doc_id : first_stage_refill(in)) {
        if (in_pool.insert(doc_id).second) pool.push_back(doc_id);
    }

    const EmbeddingVector& step_vec = embeddings.for_text(step_text);
    std::vector<double> sims(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) {
        auto it = doc_lookup.find(pool[i]);
        if (it == doc_lookup.end()) {
            throw std::runtime_error("step_adaptive_refill: doc \"" + pool[i] +
                                     "\" not in corpus");
        }
        sims[i] = cosine_sim(step_vec, embeddings.for_doc(*it->second));
    }
    std::vector<size_t> order(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return pool[a] < pool[b];
    });

    if (source) *source = "step_adaptive";
    std::vector<std::string> out;
    for (size_t i : order) {
        if (static_cast<int>(out.size()) >= in.need) break;
        out.push_back(pool[i]);
    }
    return out;
}

RunResult run_query(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps) {
    cfg.validate();
    if (!deps.index || !deps.corpus || !deps.embeddings || !deps.reranker) {
        throw std::runtime_error("run_query: missing pipeline dependency");
    }

    std::unordered_map<std::string, const Document*> doc_lookup;
    doc_lookup.reserve(deps.corpus->size());
    for (const auto& doc : *deps.corpus) doc_lookup[doc.id] = &doc;

    auto docs_for = [&](const std::vector<std::string>& ids) {
        std::vector<Document> docs;
        docs.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = doc_lookup.find(id);
            if (it == doc_lookup.end()) {
                throw std::runtime_error("run_query: doc \"" + id + "\" not in corpus");
            }
            docs.push_back(*it->second);
        }
        return docs;
    };

    std::vector<std::string> first_stage;
    for (const auto& hit : bm25_search(*deps.index, query, cfg.first_stage_depth)) {
        first_stage.push_back(hit.doc_id);
    }

    RunResult result;
    result.query_id = query.id;
    if (first_stage.empty()) return result;  // nothing retrievable for this query

    WindowState state;
    state.index = 1;
    for (const auto& doc_id : first_stage) {
        if (static_cast<int>(state.docs.size()) >= cfg.window_size) break;
        state.docs.push_back(doc_id);
        state.seen.insert(doc_id);
    }

    std::string refill_source = "first_stage";
    std::vector<std::string> refill_ids = state.docs;
    std::optional<Plan> reused_plan;

    for (int i = 1; i <= cfg.total_windows; ++i) {
        state.index = i;
        std::vector<Document> window_docs = docs_for(state.docs);
        RerankOutput out = plan_and_rerank(query, window_docs, *deps.reranker);
        if (cfg.reuse_plan) {
            if (!reused_plan) {
                reused_plan = out.plan;
            } else {
                out.plan = *reused_plan;
            }
        }
        out.plan.window_index = i;
        state.plan_history.push_back(out.plan);

        ledger_record(state.ledger, out.ranking);

        ScoreOptions score_opts;
        score_opts.con_active = (i > cfg.con_warmup_windows) && !cfg.ablate_con;
        score_opts.ablate_base = cfg.ablate_base;
        std::vector<Document> ranked_docs = docs_for(out.ranking);
        std::vector<StepReward> rewards =
            score_steps(out.plan, ranked_docs, state.ledger, *deps.embeddings, score_opts);
        int selected = select_step(rewards);

        WindowTrace trace;
        trace.index = i;
        trace.input_ids = state.docs;
        trace.reranked_ids = out.ranking;
        for (const auto& step : out.plan.steps) trace.plan_texts.push_back(step.text);
        trace.rewards = rewards;
        trace.selected_step = selected;
        trace.refill_source = refill_source;
        trace.refill_ids = refill_ids;
        result.trace.push_back(std::move(trace));

        if (i == cfg.total_windows) {
            // Final list: last reranked window, then demotions latest-first,
            // then the untouched first-stage tail. Scores descend from b.
            int position = 0;
            auto emit = [&](const std::string& doc_id) {
                result.final_ranking.push_back(
                    {doc_id, static_cast<double>(cfg.window_size - position)});
                ++position;
            };
            for (const auto& doc_id : out.ranking) emit(doc_id);
            for (const auto& doc_id : state.demoted) emit(doc_id);
            for (const auto& doc_id : first_stage) {
                if (!state.seen.count(doc_id)) emit(doc_id);
            }
            break;
        }

        size_t keep_count = std::min(static_cast<size_t>(cfg.carry), out.ranking.size());
        std::vector<std::string> keep(out.ranking.begin(),
                                      out.ranking.begin() + static_cast<std::ptrdiff_t>(keep_count));
        state.demoted.insert(state.demoted.begin(),
                             out.ranking.begin() + static_cast<std::ptrdiff_t>(keep_count),
                             out.ranking.end());

        RefillInputs refill;
        refill.graph = deps.graph;
        refill.carried = keep;
        refill.seen = &state.seen;
        refill.first_stage = &first_stage;
        refill.need = cfg.window_size - static_cast<int>(keep.size());
        refill.neighbor_pool_filter = cfg.neighbor_pool_filter;

        int target_window = i + 1;
        bool expansion = is_expansion_window(target_window, cfg.total_windows);
        std::vector<std::string> fresh;
        refill_source = "first_stage";
        switch (cfg.mode) {
            case PipelineMode::PsrOnly:
                fresh = first_stage_refill(refill);
                break;
            case PipelineMode::Repair:
                // With both rewards ablated there is no step signal left and
                // the schedule degrades to psr_only.
                if (!expansion || (cfg.ablate_base && cfg.ablate_con)) {
                    fresh = first_stage_refill(refill);
                } else {
                    if (deps.graph_access_observer && deps.graph != nullptr && !keep.empty()) {
                        deps.graph_access_observer(target_window);
                    }
                    const ReasoningStep& star = out.plan.steps[static_cast<size_t>(selected - 1)];
                    fresh = step_adaptive_refill(refill, star.text, *deps.embeddings, doc_lookup,
                                                 &refill_source);
                }
                break;
            case PipelineMode::StandardNar:
                if (expansion && target_window % 2 == 0) {
                    if (deps.graph_access_observer && deps.graph != nullptr && !keep.empty()) {
                        deps.graph_access_observer(target_window);
                    }
                    fresh = standard_nar_refill(refill, &refill_source);
                } else {
                    fresh = first_stage_refill(refill);
                }
                break;
        }

        state.docs = keep;
        for (const auto& doc_id : fresh) {
            state.docs.push_back(doc_id);
            state.seen.insert(doc_id);
        }
        refill_ids = fresh;
        if (fresh.empty()) refill_source = "carry_only";
        if (state.docs.empty()) {
            // Nothing left to rerank; close out with what we have.
            int position = 0;
            auto emit = [&](const std::string& doc_id) {
                result.final_ranking.push_back(
                    {doc_id, static_cast<double>(cfg.window_size - position)});
                ++position;
            };
            for (const auto& doc_id : state.demoted) emit(doc_id);
            break;
        }
    }
    return result;
}

WorkloadOutcome run_workload(const std::vector<Query>& queries, const PipelineConfig& cfg,
                             const PipelineDeps& deps, const WorkloadOptions& options) {
    std::vector<std::optional<RunResult>> slots(queries.size());
    std::vector<std::optional<std::string>> errors(queries.size());
    std::mutex io_mu;
    std::atomic<size_t> next{0};

    auto worker = [&] {
        while (true) {
            size_t idx = next.fetch_add(1);
            if (idx >= queries.size()) return;
            const Query& q = queries[idx];
            try {
                RunResult r = run_query(q, cfg, deps);
                std::lock_guard<std::mutex> lock(io_mu);
                if (options.verbose) {
                    std::cout << "[" << q.id << "] ok: " << r.final_ranking.size()
                              << " docs ranked over " << r.trace.size() << " windows\n";
                }
                slots[idx] = std::move(r);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(io_mu);
                if (options.verbose) {
                    std::cout << "[" << q.id << "] FAILED: " << e.what() << "\n";
                }
                errors[idx] = e.what();
            }
        }
    };

    int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(queries.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    WorkloadOutcome outcome;
    for (size_t i = 0; i < queries.size(); ++i) {
        if (slots[i]) outcome.results.push_back(std::move(*slots[i]));
        if (errors[i]) outcome.failures.emplace_back(queries[i].id, *errors[i]);
    }

    if (!options.run_file_path.empty()) {
        write_run_file(outcome.results, options.run_file_path, options.run_tag);
    }
    if (!options.trace_dir.empty()) {
        fs::create_directories(options.trace_dir);
        for (const auto& result : outcome.results) {
            std::string name;
            for (char c : result.query_id) {
                name += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
                         c == '-')
                            ? c
                            : '_';
            }
            write_trace_file(result, (fs::path(options.trace_dir) / (name + ".jsonl")).string());
        }
    }
    return outcome;
}

void write_run_file(const std::vector<RunResult>& results, const std::string& path,
                    const std::string& run_tag) {
    std::string body;
    for (const auto& result : results) {
        int rank = 1;
        for (const auto& [doc_id, score] : result.final_ranking) {
            body += result.query_id;
            body += " Q0 ";
            body += doc_id;
            body += ' ';
            body += std::to_string(rank);
            body += ' ';
            body += format_fixed(score, 4);
            body += ' ';
            body += run_tag;
            body += '\n';
            ++rank;
        }
    }
    write_text_file(path, body);
}

void write_trace_file(const RunResult& result, const std::string& path) {
    std::string body;
    for (const auto& w : result.trace) {
        json rec;
        rec["type"] = "window";
        rec["window"] = w.index;
        rec["input"] = w.input_ids;
        rec["reranked"] = w.reranked_ids;
        rec["plan"] = w.plan_texts;
        rec["selected_step"] = w.selected_step;
        rec["refill_source"] = w.refill_source;
        rec["refill"] = w.refill_ids;
        body += rec.dump();
        body += '\n';
        for (const auto& r : w.rewards) {
            json rr;
            rr["type"] = "reward";
            rr["window"] = w.index;
            rr["step"] = r.step_index;
            rr["r_base"] = r.r_base;
            rr["r_con"] = r.r_con;
            rr["r_total"] = r.r_total;
            rr["selected"] = (r.step_index == w.selected_step);
            body += rr.dump();
            body += '\n';
        }
    }
    write_text_file(path, body);
}

}  // namespace repair
