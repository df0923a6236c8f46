// Acceptance suite: one test case per release criterion, each printed as a
// PASS/FAIL line by the listener below. Everything runs offline against the
// mock embedder and scripted reranker.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <random>
#include <set>
#include <sys/wait.h>

#include <json.hpp>

#include "repair/config.hpp"
#include "repair/eval.hpp"
#include "repair/pipeline.hpp"
#include "repair/planner.hpp"
#include "repair/rewards.hpp"
#include "test_support.hpp"

using namespace repair;
using namespace testsupport;
using json = nlohmann::json;

namespace {

struct AcceptanceReporter : public doctest::IReporter {
    explicit AcceptanceReporter(const doctest::ContextOptions&) {}

    void report_query(const doctest::QueryData&) override {}
    void test_run_start() override {}
    void test_run_end(const doctest::TestRunStats&) override {}
    void test_case_start(const doctest::TestCaseData& data) override { current_ = data.m_name; }
    void test_case_reenter(const doctest::TestCaseData&) override {}
    void test_case_end(const doctest::CurrentTestCaseStats& stats) override {
        std::printf("[acceptance] %s: %s (%.2fs)\n",
                    stats.testCaseSuccess ? "PASS" : "FAIL", current_, stats.seconds);
        std::fflush(stdout);
    }
    void test_case_exception(const doctest::TestCaseException&) override {}
    void subcase_start(const doctest::SubcaseSignature&) override {}
    void subcase_end() override {}
    void log_assert(const doctest::AssertData&) override {}
    void log_message(const doctest::MessageData&) override {}
    void test_case_skipped(const doctest::TestCaseData&) override {}

    const char* current_ = "";
};

REGISTER_LISTENER("acceptance", 1, AcceptanceReporter);

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double ref_sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

struct Harness {
    std::vector<Document> docs;
    Bm25Index index;
    CorpusGraph graph;
    MockEmbedder embedder{256};
    EmbeddingProvider provider{embedder};
    ScriptedOracleReranker oracle{provider};
    PipelineDeps deps;

    explicit Harness(std::vector<Document> corpus, int degree = 16) : docs(std::move(corpus)) {
        index = bm25_build(docs);
        std::unordered_map<std::string, EmbeddingVector> embeddings;
        for (const auto& d : docs) embeddings[d.id] = embedder.embed(d.text);
        graph = build_graph(docs, embeddings, degree, /*threads=*/4);
        deps.index = &index;
        deps.graph = &graph;
        deps.corpus = &docs;
        deps.embeddings = &provider;
        deps.reranker = &oracle;
    }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(REPAIR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("criterion 1: metric oracle equivalence on 1000 fuzzed instances") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);

    for (int trial = 0; trial < 1000; ++trial) {
        int n_docs = 1 + static_cast<int>(rng() % 50);
        std::vector<std::string> ranking;
        for (int d = 0; d < n_docs; ++d) ranking.push_back("d" + std::to_string(d));
        std::shuffle(ranking.begin(), ranking.end(), rng);

        std::map<std::string, int> qrels;
        int judged = static_cast<int>(rng() % (static_cast<unsigned long>(n_docs) + 1));
        for (int j = 0; j < judged; ++j) {
            qrels["d" + std::to_string(rng() % static_cast<unsigned long>(n_docs))] =
                static_cast<int>(rng() % 5);
        }

        double ndcg = ndcg_at_k(ranking, qrels, 10);
        REQUIRE(std::abs(ndcg - oracle_ndcg(ranking, qrels, 10)) <= 1e-9);

        auto recall = recall_at_k(ranking, qrels, 100);
        double oracle_r = oracle_recall(ranking, qrels, 100);
        if (oracle_r < 0.0) {
            REQUIRE_FALSE(recall.has_value());
        } else {
            REQUIRE(recall.has_value());
            REQUIRE(std::abs(*recall - oracle_r) <= 1e-9);
        }
    }
    CHECK(seconds_since(start) < 10.0);
}

TEST_CASE("criterion 2: Bradley-Terry consensus identities") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(103);

    // Complement identity holds exactly for arbitrary fuzzed ledgers.
    for (int trial = 0; trial < 2000; ++trial) {
        PreferenceLedger ledger;
        int pairs = static_cast<int>(rng() % 12);
        for (int i = 0; i < pairs; ++i) {
            std::string p = "d" + std::to_string(rng() % 15);
            std::string q = "d" + std::to_string(rng() % 15);
            if (p == q) continue;
            ledger.above_counts[{p, q}] = static_cast<int>(rng() % 100000);
        }
        std::string p = "d" + std::to_string(rng() % 15);
        std::string q = "d" + std::to_string((rng() % 14 + 1 + std::stoul(p.substr(1))) % 15);
        if (p == q) continue;
        REQUIRE(bt_probability(ledger, p, q) + bt_probability(ledger, q, p) == 1.0);
    }

    // Fresh ledger: every pair is uninformative, so the mean is exactly 1/2.
    for (int trial = 0; trial < 50; ++trial) {
        PreferenceLedger fresh;
        std::vector<std::string> ranking;
        int n = 2 + static_cast<int>(rng() % 20);
        for (int d = 0; d < n; ++d) ranking.push_back("d" + std::to_string(d));
        std::shuffle(ranking.begin(), ranking.end(), rng);
        REQUIRE(std::abs(consistency_reward(fresh, ranking) - 0.5) <= 1e-12);
    }

    // Recording R then scoring R gives sigmoid(1) on every pair.
    for (int trial = 0; trial < 50; ++trial) {
        PreferenceLedger ledger;
        std::vector<std::string> ranking;
        int n = 2 + static_cast<int>(rng() % 20);
        for (int d = 0; d < n; ++d) ranking.push_back("d" + std::to_string(d));
        std::shuffle(ranking.begin(), ranking.end(), rng);
        ledger_record(ledger, ranking);
        REQUIRE(std::abs(consistency_reward(ledger, ranking) - ref_sigmoid(1.0)) <= 1e-9);
    }
    CHECK(seconds_since(start) < 5.0);
}

TEST_CASE("criterion 3: reward formula checks") {
    std::mt19937_64 rng(107);
    auto at_cosine = [](double c) {
        return EmbeddingVector{{c, std::sqrt(std::max(0.0, 1.0 - c * c))}};
    };
    const EmbeddingVector axis{{1.0, 0.0}};

    // Constructed similarities match the direct negative-mean-sigmoid form.
    for (int trial = 0; trial < 500; ++trial) {
        int n = 1 + static_cast<int>(rng() % 8);
        std::vector<EmbeddingVector> window;
        double direct = 0.0;
        for (int i = 0; i < n; ++i) {
            double sim = -1.0 + 2.0 * static_cast<double>(rng() % 10001) / 10000.0;
            window.push_back(at_cosine(sim));
            direct += ref_sigmoid(cosine_sim(axis, window.back()));
        }
        direct = -direct / n;
        REQUIRE(std::abs(base_reward(axis, window) - direct) <= 1e-12);
    }

    // Sigmoid symmetry: opposite similarities average to exactly one half.
    std::vector<EmbeddingVector> symmetric{at_cosine(1.0), EmbeddingVector{{-1.0, 0.0}}};
    REQUIRE(std::abs(base_reward(axis, symmetric) - (-0.5)) <= 1e-12);

    // Argmax is invariant under a uniform shift of every base reward.
    for (int trial = 0; trial < 500; ++trial) {
        int n = 1 + static_cast<int>(rng() % 10);
        std::vector<StepReward> rewards;
        for (int i = 0; i < n; ++i) {
            StepReward r;
            r.step_index = i + 1;
            r.r_base = -static_cast<double>(rng() % 256) / 256.0;  // dyadic: shifts stay exact
            r.r_con = static_cast<double>(rng() % 256) / 256.0;
            r.r_total = r.r_base + r.r_con;
            rewards.push_back(r);
        }
        int before = select_step(rewards);
        double shift = static_cast<double>(static_cast<int>(rng() % 1024) - 512) / 256.0;
        for (auto& r : rewards) {
            r.r_base += shift;
            r.r_total = r.r_base + r.r_con;
        }
        REQUIRE(select_step(rewards) == before);
    }
}

TEST_CASE("criterion 4: window accounting over a 120-doc first stage") {
    std::vector<Document> docs;
    for (int i = 1; i <= 150; ++i) {
        docs.push_back({"d" + zero_pad(i, 3), "common w" + zero_pad(i, 3), ""});
    }
    Harness h(std::move(docs), /*degree=*/8);
    OracleScript identity;
    identity.steps = {"s"};
    identity.rule = OracleScript::Rule::WindowOrder;
    h.oracle.set_default_script(identity);

    PipelineConfig cfg;  // b=20, k=10, I=9 defaults
    cfg.mode = PipelineMode::PsrOnly;
    cfg.first_stage_depth = 120;

    Query q{"q1", "common"};
    RunResult first = run_query(q, cfg, h.deps);
    REQUIRE(first.trace.size() == 9);
    std::set<std::string> visited;
    for (const auto& w : first.trace) {
        REQUIRE(w.input_ids.size() == 20);
        visited.insert(w.input_ids.begin(), w.input_ids.end());
    }
    REQUIRE(visited.size() == 100);  // 20 + 8 * 10

    RunResult second = run_query(q, cfg, h.deps);
    REQUIRE(second.final_ranking.size() == first.final_ranking.size());
    for (size_t i = 0; i < first.final_ranking.size(); ++i) {
        REQUIRE(second.final_ranking[i].doc_id == first.final_ranking[i].doc_id);
        REQUIRE(second.final_ranking[i].score == first.final_ranking[i].score);
    }
}

TEST_CASE("criterion 5: bounded-recall demonstration with planted bridge docs") {
    auto start = std::chrono::steady_clock::now();
    BridgeFixture fx = make_bridge_fixture(50, 100);  // 350 docs, 2 planted bridges per query
    Harness h(fx.docs, /*degree=*/16);
    for (const auto& [qid, script] : fx.scripts) h.oracle.set_script(qid, script);

    PipelineConfig repair_cfg;  // b=20, k=10, I=9, warm-up 5: the defaults
    repair_cfg.mode = PipelineMode::Repair;
    PipelineConfig psr_cfg = repair_cfg;
    psr_cfg.mode = PipelineMode::PsrOnly;

    int repair_full = 0;
    for (const auto& q : fx.queries) {
        std::map<std::string, int> bridge_qrels;
        for (const auto& b : fx.bridges[q.id]) bridge_qrels[b] = 1;

        RunResult repaired = run_query(q, repair_cfg, h.deps);
        std::vector<std::string> repaired_ids;
        for (const auto& [id, _] : repaired.final_ranking) repaired_ids.push_back(id);
        if (*recall_at_k(repaired_ids, bridge_qrels, 100) == 1.0) ++repair_full;

        RunResult plain = run_query(q, psr_cfg, h.deps);
        std::vector<std::string> plain_ids;
        for (const auto& [id, _] : plain.final_ranking) plain_ids.push_back(id);
        REQUIRE(*recall_at_k(plain_ids, bridge_qrels, 100) == 0.0);
    }
    // Planted bridges are recovered for at least 90% of the 50 queries.
    CHECK(repair_full >= 45);
    CHECK(seconds_since(start) < 60.0);
}

TEST_CASE("criterion 6: mode and ablation equivalences are byte-identical") {
    TempDir dir("acc6");
    BridgeFixture fx = make_bridge_fixture(6, 100);
    Harness h(fx.docs, /*degree=*/16);
    for (const auto& [qid, script] : fx.scripts) h.oracle.set_script(qid, script);

    PipelineConfig psr;
    psr.mode = PipelineMode::PsrOnly;

    PipelineConfig ablated;
    ablated.mode = PipelineMode::Repair;
    ablated.ablate_base = true;
    ablated.ablate_con = true;

    WorkloadOptions opts;
    opts.run_tag = "equiv";

    opts.run_file_path = dir.file("psr.txt");
    run_workload(fx.queries, psr, h.deps, opts);
    opts.run_file_path = dir.file("ablated.txt");
    run_workload(fx.queries, ablated, h.deps, opts);
    auto psr_bytes = read_file(dir.file("psr.txt"));
    REQUIRE(!psr_bytes.empty());
    CHECK(psr_bytes == read_file(dir.file("ablated.txt")));

    // Forcing the neighbor pool empty must also collapse repair to psr_only.
    CorpusGraph empty_graph;
    empty_graph.degree = h.graph.degree;
    empty_graph.doc_order = h.graph.doc_order;
    for (const auto& id : empty_graph.doc_order) empty_graph.adjacency[id] = {};
    PipelineDeps empty_deps = h.deps;
    empty_deps.graph = &empty_graph;

    PipelineConfig repair_cfg;
    repair_cfg.mode = PipelineMode::Repair;
    opts.run_file_path = dir.file("empty_pool.txt");
    run_workload(fx.queries, repair_cfg, empty_deps, opts);
    CHECK(psr_bytes == read_file(dir.file("empty_pool.txt")));
}

TEST_CASE("criterion 7: parser hardening over 10000 fuzzed outputs") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(113);
    const std::vector<std::string> pieces{
        "[Document Ranking]", "[Reasoning Trace]", "Step 1: think", "Step 99: loop",
        "Step : broken", "[1]", "[2]", "[7]", "[0]", "[15]", ">", "]", "[", "plain text",
        "[999999999999999999999]", "\n", "  ", "Step 3:", "[3]>[3]>[3]", "> > >", "[-2]",
    };

    for (int trial = 0; trial < 10000; ++trial) {
        int window_size = 1 + static_cast<int>(rng() % 25);
        std::vector<std::string> window;
        for (int d = 0; d < window_size; ++d) window.push_back("w" + std::to_string(d));

        std::string raw;
        int n = static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            raw += pieces[rng() % pieces.size()];
            if (rng() % 4 == 0) raw += "\n";
        }

        RerankOutput out = parse_output(raw, window, "fallback query");
        auto sorted = out.ranking;
        std::sort(sorted.begin(), sorted.end());
        auto expected = window;
        std::sort(expected.begin(), expected.end());
        REQUIRE(sorted == expected);
        REQUIRE(!out.plan.steps.empty());
    }
    CHECK(seconds_since(start) < 10.0);
}

TEST_CASE("criterion 8: end-to-end cold runs are byte-identical") {
    BridgeFixture fx = make_bridge_fixture(4, 30);
    std::string corpus = corpus_jsonl(fx.docs);
    std::string queries = queries_jsonl(fx.queries);
    std::string qrels;
    for (const auto& q : fx.queries) {
        for (const auto& a : fx.anchors[q.id]) qrels += q.id + " 0 " + a + " 1\n";
        for (const auto& b : fx.bridges[q.id]) qrels += q.id + " 0 " + b + " 1\n";
    }
    json script;
    script["default"] = {{"rule", "by-cosine-to-step"}, {"step", 1}};
    json queries_scripts = json::object();
    for (const auto& [qid, s] : fx.scripts) {
        queries_scripts[qid] = {{"steps", s.steps}, {"rule", "by-cosine-to-step"}, {"step", 1}};
    }
    script["queries"] = queries_scripts;

    auto cold_run = [&](TempDir& dir) {
        write_file(dir.file("corpus.jsonl"), corpus);
        write_file(dir.file("queries.jsonl"), queries);
        write_file(dir.file("qrels.txt"), qrels);
        write_file(dir.file("script.json"), script.dump());
        json cfg;
        cfg["paths"] = {{"corpus", dir.file("corpus.jsonl")},
                        {"queries", dir.file("queries.jsonl")},
                        {"qrels", dir.file("qrels.txt")},
                        {"cache_dir", dir.file("cache")},
                        {"output_dir", dir.file("out")}};
        cfg["pipeline"] = {{"window_size", 6}, {"carry", 3},  {"total_windows", 5},
                           {"graph_degree", 8}, {"mode", "repair"}, {"first_stage_depth", 18}};
        cfg["embedder"] = {{"backend", "mock"}, {"dim", 256}};
        cfg["reranker"] = {{"backend", "scripted"}, {"script_path", dir.file("script.json")}};
        cfg["run_tag"] = "e2e";
        write_file(dir.file("config.json"), cfg.dump(2));

        REQUIRE(run_cli("index --config " + dir.file("config.json")) == 0);
        REQUIRE(run_cli("graph --config " + dir.file("config.json")) == 0);
        REQUIRE(run_cli("run --config " + dir.file("config.json")) == 0);
        REQUIRE(run_cli("eval --run " + dir.file("out") + "/run.txt --qrels " +
                        dir.file("qrels.txt") + " --metric ndcg@10 --metric recall@100 --out " +
                        dir.file("out") + "/report.json") == 0);
        return std::make_pair(read_file(dir.file("out") + "/run.txt"),
                              read_file(dir.file("out") + "/report.json"));
    };

    TempDir dir_a("acc8a");
    TempDir dir_b("acc8b");
    auto [run_a, report_a] = cold_run(dir_a);
    auto [run_b, report_b] = cold_run(dir_b);
    REQUIRE(!run_a.empty());
    CHECK(run_a == run_b);
    REQUIRE(!report_a.empty());
    CHECK(report_a == report_b);
}
