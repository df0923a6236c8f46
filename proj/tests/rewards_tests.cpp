#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "repair/rewards.hpp"
#include "test_support.hpp"

using namespace repair;
using namespace testsupport;

namespace {

// Unit vector at a prescribed cosine against the reference axis (1, 0).
EmbeddingVector at_cosine(double c) {
    return EmbeddingVector{{c, std::sqrt(std::max(0.0, 1.0 - c * c))}};
}

const EmbeddingVector kAxis{{1.0, 0.0}};

double ref_sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

TEST_CASE("base_reward at all-zero similarity is -0.5") {
    std::vector<EmbeddingVector> window{at_cosine(0.0), at_cosine(0.0)};
    CHECK(base_reward(kAxis, window) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("base_reward uses sigmoid symmetry for opposite sims") {
    std::vector<EmbeddingVector> window{at_cosine(1.0), EmbeddingVector{{-1.0, 0.0}}};
    CHECK(base_reward(kAxis, window) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("base_reward matches a direct evaluation on mixed sims") {
    std::vector<double> sims{0.3, 0.7, -0.2};
    std::vector<EmbeddingVector> window;
    for (double s : sims) window.push_back(at_cosine(s));
    double expected = -(ref_sigmoid(0.3) + ref_sigmoid(0.7) + ref_sigmoid(-0.2)) / 3.0;
    CHECK(base_reward(kAxis, window) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(base_reward(kAxis, window) < 0.0);
    CHECK(base_reward(kAxis, window) > -1.0);
}

TEST_CASE("base_reward strictly decreases when any one similarity rises") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> sims;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            sims.push_back(-0.9 + 1.6 * static_cast<double>(rng() % 1000) / 1000.0);
        }
        std::vector<EmbeddingVector> window;
        for (double s : sims) window.push_back(at_cosine(s));
        double before = base_reward(kAxis, window);

        size_t bump = rng() % sims.size();
        window[bump] = at_cosine(sims[bump] + 0.05);
        CHECK(base_reward(kAxis, window) < before);
    }
}

TEST_CASE("step_induced_ranking puts the self-identical doc first") {
    MockEmbedder embedder(128);
    EmbeddingProvider provider(embedder);
    std::vector<Document> window{{"d1", "solar panels efficiency", ""},
                                 {"d2", "wind turbine blades", ""},
                                 {"d3", "tidal energy pilot", ""}};
    ReasoningStep step{1, "wind turbine blades"};
    auto ranked = step_induced_ranking(step, window, provider);
    CHECK(ranked[0] == "d2");
}

TEST_CASE("step_induced_ranking breaks full ties by ascending doc id") {
    MockEmbedder embedder(64);
    EmbeddingProvider provider(embedder);
    std::vector<Document> window{{"dz", "same words", ""},
                                 {"da", "same words", ""},
                                 {"dm", "same words", ""}};
    ReasoningStep step{1, "anything else"};
    CHECK(step_induced_ranking(step, window, provider) ==
          std::vector<std::string>{"da", "dm", "dz"});
}

TEST_CASE("step_induced_ranking equals a brute-force comparator") {
    MockEmbedder embedder(64);
    EmbeddingProvider provider(embedder);
    std::vector<Document> window{{"d1", "apples and pears", ""},
                                 {"d2", "pears and plums", ""},
                                 {"d3", "engine oil change", ""},
                                 {"d4", "apples apples apples", ""}};
    ReasoningStep step{1, "apples pears"};
    auto got = step_induced_ranking(step, window, provider);

    auto step_vec = embedder.embed(step.text);
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& d : window) {
        expected.emplace_back(oracle_cosine(step_vec, embedder.embed(d.text)), d.id);
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; i < expected.size(); ++i) CHECK(got[i] == expected[i].second);
}

TEST_CASE("ledger_record counts every ordered pair once") {
    PreferenceLedger ledger;
    ledger_record(ledger, {"a", "b", "c"});
    CHECK(ledger.count("a", "b") == 1);
    CHECK(ledger.count("a", "c") == 1);
    CHECK(ledger.count("b", "c") == 1);
    CHECK(ledger.count("b", "a") == 0);
    CHECK(ledger.count("c", "a") == 0);
    CHECK(ledger.windows_recorded == 1);
}

TEST_CASE("opposite rankings record opposite counts") {
    PreferenceLedger ledger;
    ledger_record(ledger, {"a", "b"});
    ledger_record(ledger, {"b", "a"});
    CHECK(ledger.count("a", "b") == 1);
    CHECK(ledger.count("b", "a") == 1);
    CHECK(ledger.windows_recorded == 2);
}

TEST_CASE("a ranking of n docs adds n(n-1)/2 pair increments") {
    PreferenceLedger ledger;
    std::vector<std::string> ranking;
    for (int i = 0; i < 7; ++i) ranking.push_back("d" + std::to_string(i));
    ledger_record(ledger, ranking);
    int total = 0;
    for (const auto& [_, c] : ledger.above_counts) total += c;
    CHECK(total == 7 * 6 / 2);
}

TEST_CASE("ledger_record rejects duplicate ids") {
    PreferenceLedger ledger;
    CHECK_THROWS(ledger_record(ledger, {"a", "b", "a"}));
}

TEST_CASE("bt_probability is 0.5 under symmetric counts") {
    PreferenceLedger ledger;
    CHECK(bt_probability(ledger, "p", "q") == 0.5);
    ledger_record(ledger, {"p", "q"});
    ledger_record(ledger, {"q", "p"});
    CHECK(bt_probability(ledger, "p", "q") == 0.5);
}

TEST_CASE("bt_probability matches the closed form for gamma=2 vs 0") {
    PreferenceLedger ledger;
    ledger_record(ledger, {"p", "q"});
    ledger_record(ledger, {"p", "q"});
    double e2 = std::exp(2.0);
    CHECK(bt_probability(ledger, "p", "q") == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-12));
    CHECK(bt_probability(ledger, "p", "q") == doctest::Approx(0.8808).epsilon(1e-4));
}

TEST_CASE("bt probabilities of the two directions sum to exactly 1") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        PreferenceLedger ledger;
        std::string p = "d" + std::to_string(rng() % 20);
        std::string q = "d" + std::to_string(rng() % 20);
        if (p == q) continue;
        ledger.above_counts[{p, q}] = static_cast<int>(rng() % 1000000);
        ledger.above_counts[{q, p}] = static_cast<int>(rng() % 1000000);
        CHECK(bt_probability(ledger, p, q) + bt_probability(ledger, q, p) == 1.0);
    }
    PreferenceLedger ledger;
    CHECK_THROWS(bt_probability(ledger, "same", "same"));
}

TEST_CASE("consistency_reward on a fresh ledger is 0.5 for any ranking") {
    PreferenceLedger ledger;
    CHECK(consistency_reward(ledger, {"a", "b", "c", "d"}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS(consistency_reward(ledger, {"a"}));
}

TEST_CASE("recording R then scoring R gives sigmoid(1); reversed gives sigmoid(-1)") {
    PreferenceLedger ledger;
    std::vector<std::string> ranking{"a", "b", "c", "d", "e"};
    ledger_record(ledger, ranking);
    CHECK(consistency_reward(ledger, ranking) ==
          doctest::Approx(ref_sigmoid(1.0)).epsilon(1e-9));

    std::vector<std::string> reversed(ranking.rbegin(), ranking.rend());
    CHECK(consistency_reward(ledger, reversed) ==
          doctest::Approx(ref_sigmoid(-1.0)).epsilon(1e-9));
    CHECK(consistency_reward(ledger, reversed) < 0.5);
}

TEST_CASE("consistency_reward is invariant under consistent relabeling") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> docs{"a", "b", "c", "d"};
        PreferenceLedger ledger;
        for (int w = 0; w < 4; ++w) {
            auto shuffled = docs;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            ledger_record(ledger, shuffled);
        }
        auto ranking = docs;
        std::shuffle(ranking.begin(), ranking.end(), rng);
        double original = consistency_reward(ledger, ranking);

        auto relabel = [](const std::string& id) { return "doc_" + id + "_x"; };
        PreferenceLedger relabeled;
        relabeled.windows_recorded = ledger.windows_recorded;
        for (const auto& [pair, count] : ledger.above_counts) {
            relabeled.above_counts[{relabel(pair.first), relabel(pair.second)}] = count;
        }
        std::vector<std::string> relabeled_ranking;
        for (const auto& id : ranking) relabeled_ranking.push_back(relabel(id));
        CHECK(consistency_reward(relabeled, relabeled_ranking) ==
              doctest::Approx(original).epsilon(1e-12));
    }
}

TEST_CASE("score_steps composes the parts and honors the con gate") {
    MockEmbedder embedder(128);
    EmbeddingProvider provider(embedder);
    std::vector<Document> window{{"d1", "coral reefs bleaching", ""},
                                 {"d2", "ocean temperature rise", ""},
                                 {"d3", "fishing quota policy", ""}};
    Plan plan;
    plan.steps = {{1, "coral bleaching causes"},
                  {2, "ocean warming data"},
                  {3, "policy responses"}};
    PreferenceLedger ledger;
    ledger_record(ledger, {"d2", "d1", "d3"});
    ledger_record(ledger, {"d1", "d2", "d3"});

    SUBCASE("with consistency inactive, totals equal the base reward") {
        auto rewards = score_steps(plan, window, ledger, provider, {});
        REQUIRE(rewards.size() == 3);
        for (const auto& r : rewards) {
            CHECK_FALSE(r.con_active);
            CHECK(r.r_con == 0.0);
            CHECK(r.r_total == r.r_base);
        }
    }

    SUBCASE("with consistency active, rewards recompute from raw parts") {
        ScoreOptions opts;
        opts.con_active = true;
        auto rewards = score_steps(plan, window, ledger, provider, opts);
        REQUIRE(rewards.size() == 3);
        for (size_t s = 0; s < plan.steps.size(); ++s) {
            auto step_vec = embedder.embed(plan.steps[s].text);
            double base = 0.0;
            std::vector<std::pair<double, std::string>> sims;
            for (const auto& d : window) {
                double sim = oracle_cosine(step_vec, embedder.embed(d.text));
                base += ref_sigmoid(sim);
                sims.emplace_back(sim, d.id);
            }
            base = -base / static_cast<double>(window.size());
            std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            std::vector<std::string> induced;
            for (const auto& [_, id] : sims) induced.push_back(id);
            double con = consistency_reward(ledger, induced);

            CHECK(rewards[s].r_base == doctest::Approx(base).epsilon(1e-12));
            CHECK(rewards[s].r_con == doctest::Approx(con).epsilon(1e-12));
            CHECK(rewards[s].r_total ==
                  doctest::Approx(base + con).epsilon(1e-12));
        }
    }

    SUBCASE("ablate_base zeroes the base term") {
        ScoreOptions opts;
        opts.ablate_base = true;
        opts.con_active = true;
        auto rewards = score_steps(plan, window, ledger, provider, opts);
        for (const auto& r : rewards) {
            CHECK(r.r_base == 0.0);
            CHECK(r.r_total == r.r_con);
        }
    }
}

TEST_CASE("a single-step plan yields one reward and select_step returns it") {
    MockEmbedder embedder(64);
    EmbeddingProvider provider(embedder);
    std::vector<Document> window{{"d1", "anything", ""}};
    Plan plan;
    plan.steps = {{1, "just one step"}};
    PreferenceLedger ledger;
    auto rewards = score_steps(plan, window, ledger, provider, {});
    REQUIRE(rewards.size() == 1);
    CHECK(select_step(rewards) == 1);
}

TEST_CASE("select_step takes the argmax with smallest-index ties") {
    auto mk = [](int idx, double total) {
        StepReward r;
        r.step_index = idx;
        r.r_total = total;
        return r;
    };
    CHECK(select_step({mk(1, -0.4), mk(2, -0.1), mk(3, -0.3)}) == 2);
    CHECK(select_step({mk(1, -0.2), mk(2, -0.2), mk(3, -0.2)}) == 1);
    CHECK(select_step({mk(1, -0.7)}) == 1);
    CHECK_THROWS(select_step({}));
}

TEST_CASE("argmax is invariant under a uniform shift of all base rewards") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng() % 8);
        std::vector<StepReward> rewards;
        for (int i = 0; i < n; ++i) {
            StepReward r;
            r.step_index = i + 1;
            // Dyadic grid keeps the shifted comparisons exact in binary floating point.
            r.r_base = -static_cast<double>(rng() % 64) / 64.0;
            r.r_con = static_cast<double>(rng() % 64) / 64.0;
            r.r_total = r.r_base + r.r_con;
            rewards.push_back(r);
        }
        double shift = static_cast<double>(static_cast<int>(rng() % 512) - 256) / 64.0;
        auto shifted = rewards;
        for (auto& r : shifted) {
            r.r_base += shift;
            r.r_total = r.r_base + r.r_con;
        }
        CHECK(select_step(shifted) == select_step(rewards));
    }
}
