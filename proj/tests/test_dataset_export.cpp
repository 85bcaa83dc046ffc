#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "dr/dataset_export.hpp"
#include "dr/errors.hpp"
#include "test_support.hpp"

using namespace dr;

namespace {

MAG small_mag(const std::string& id, int correct_round2) {
    // Round 1: S incorrect + reflection/feedback; round 2: configurable.
    MAG mag;
    mag.problem = DebateProblem{id, "Pick the single correct option (A-J).", "Which?", "B",
                                TaskKind::multiple_choice_10};
    mag.agents = {AgentId{"S", AgentRole::student},
                  AgentId{"T1", AgentRole::teacher},
                  AgentId{"T2", AgentRole::teacher},
                  AgentId{"T3", AgentRole::teacher}};
    auto respond = [&mag](size_t idx, int round, const std::string& answer) {
        ResponseNode node;
        node.agent = mag.agents[idx];
        node.round = round;
        node.reasoning = mag.agents[idx].name + " reasons in round " + std::to_string(round) +
                         ".\nFinal Answer: " + answer;
        node.final_answer = answer;
        node.correct = answer == "B";
        mag_insert_response(mag, std::move(node));
    };
    respond(0, 1, "C");
    respond(1, 1, "B");
    respond(2, 1, "B");
    respond(3, 1, "B");
    mag_insert_annotation(mag, AnnotationNode{-1, AnnotationKind::self_reflection, mag.agents[0],
                                              mag.agents[0], 1, "S reflects"});
    mag_insert_annotation(mag, AnnotationNode{-1, AnnotationKind::teacher_feedback, mag.agents[1],
                                              mag.agents[0], 1, "T1 critiques S"});
    for (size_t i = 0; i < 4; ++i) respond(i, 2, static_cast<int>(i) < correct_round2 ? "B" : "C");
    mag.stop_reason = StopReason::consensus;
    REQUIRE(mag_validate(mag).empty());
    return mag;
}

}  // namespace

TEST_CASE("export_sft emits one example per correct response") {
    std::vector<MAG> mags = {small_mag("p1", 4)};  // 3 correct r1 + 4 correct r2
    auto sft = export_sft(mags);
    REQUIRE(sft.size() == 7);
    for (const SftExample& e : sft) {
        CHECK(e.instruction == mags[0].problem.instruction);
        CHECK(e.problem == mags[0].problem.question);
        // Full response text, no structured information section.
        CHECK(e.answer.find("Final Answer:") != std::string::npos);
        CHECK(e.answer.find("Structured information") == std::string::npos);
    }

    MAG none = small_mag("p2", 0);
    // Round 2 all incorrect: only the 3 correct round-1 teachers remain.
    std::vector<MAG> both = {none};
    CHECK(export_sft(both).size() == 3);
}

TEST_CASE("export_tdpo renders prompts like the debate engine") {
    MAG mag = small_mag("p1", 3);
    TreeBuildConfig cfg;
    auto trees = build_trees(mag, cfg);
    auto records = export_tdpo(trees);
    REQUIRE(records.size() == trees.size());
    for (size_t i = 0; i < trees.size(); ++i) {
        CHECK(records[i].prompt == render_root_prompt(trees[i]));
        CHECK(records[i].chosen == trees[i].chosen);
        CHECK(records[i].rejected == trees[i].rejected);
        if (trees[i].round == 1) {
            CHECK(records[i].prompt.find("Structured information") == std::string::npos);
        } else {
            CHECK(records[i].prompt.find("Structured information") != std::string::npos);
        }
    }
}

TEST_CASE("compute_stats counts the corpus") {
    std::vector<MAG> mags = {small_mag("p1", 4), small_mag("p2", 3)};
    TreeBuildConfig cfg;
    std::vector<PreferenceTree> trees;
    for (const MAG& mag : mags) {
        auto t = build_trees(mag, cfg);
        trees.insert(trees.end(), t.begin(), t.end());
    }
    auto sft = export_sft(mags);
    DebateStats stats = compute_stats(mags, trees, sft);

    CHECK(stats.n_debates == 2);
    CHECK(stats.rounds_histogram == std::array<std::int64_t, 4>{0, 2, 0, 0});
    CHECK(stats.n_responses == 16);
    CHECK(stats.n_self_reflections == 2);
    CHECK(stats.n_teacher_feedback == 2);
    // p1: 3 + 4 correct; p2: 3 + 3 correct.
    CHECK(stats.n_sft == 13);
    // p1: 3 round-1 pairs; p2: 3 round-1 + 3 round-2 pairs.
    CHECK(stats.n_tdpo == 9);
    const std::int64_t hist_total =
        stats.rounds_histogram[0] + stats.rounds_histogram[1] + stats.rounds_histogram[2] +
        stats.rounds_histogram[3];
    CHECK(hist_total == stats.n_debates);
}

TEST_CASE("compute_stats on an empty corpus is all zeros") {
    DebateStats stats = compute_stats({}, {}, {});
    CHECK(stats == DebateStats{});
}

TEST_CASE("stats JSON mirrors the reporting shape") {
    // Representative production-scale counts, used as a format reference.
    DebateStats stats;
    stats.n_debates = 1000;
    stats.rounds_histogram = {85, 606, 149, 160};
    stats.n_responses = 9524;
    stats.n_self_reflections = 2579;
    stats.n_teacher_feedback = 4111;
    stats.n_sft = 6957;
    stats.n_tdpo = 7744;

    const std::string doc = stats_to_json(stats);
    for (const char* key : {"n_debates", "rounds_histogram", "n_responses", "n_self_reflections",
                            "n_teacher_feedback", "n_sft", "n_tdpo"}) {
        CHECK(doc.find(key) != std::string::npos);
    }
    CHECK(stats_from_json(doc) == stats);
}

TEST_CASE("JSONL round-trips are lossless") {
    std::mt19937 rng(123);
    std::vector<MAG> mags;
    for (int i = 0; i < 10; ++i) mags.push_back(dr::testing::random_valid_mag(rng));

    auto sft = export_sft(mags);
    std::stringstream sft_io;
    write_sft_jsonl(sft_io, sft);
    CHECK(read_sft_jsonl(sft_io) == sft);

    TreeBuildConfig cfg;
    std::vector<PreferenceTree> trees;
    for (const MAG& mag : mags) {
        auto t = build_trees(mag, cfg);
        trees.insert(trees.end(), t.begin(), t.end());
    }
    std::stringstream trees_io;
    write_trees_jsonl(trees_io, trees);
    CHECK(read_trees_jsonl(trees_io) == trees);

    auto tdpo = export_tdpo(trees);
    std::stringstream tdpo_io;
    write_tdpo_jsonl(tdpo_io, tdpo);
    CHECK(read_tdpo_jsonl(tdpo_io) == tdpo);
}

TEST_CASE("JSONL rejects junk") {
    std::istringstream bad_line("{\"instruction\":\"i\",\"problem\":\"p\"}\n");
    CHECK_THROWS_AS(read_sft_jsonl(bad_line), ParseError);
    std::istringstream extra("{\"prompt\":\"p\",\"chosen\":\"c\",\"rejected\":\"r\",\"x\":1}\n");
    CHECK_THROWS_AS(read_tdpo_jsonl(extra), ParseError);
    std::istringstream broken("not json\n");
    CHECK_THROWS_AS(read_trees_jsonl(broken), ParseError);
}

TEST_CASE("compute_stats rejects out-of-range round counts") {
    MAG mag = small_mag("p1", 4);
    mag.rounds_completed = 0;
    mag.responses.clear();
    mag.annotations.clear();
    std::vector<MAG> mags = {mag};
    CHECK_THROWS_AS(compute_stats(mags, {}, {}), ValidationError);
}
