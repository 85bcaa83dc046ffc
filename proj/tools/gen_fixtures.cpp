// Regenerates the scripted debate fixtures under tests/fixtures/. Each plan
// describes per-round answers for every agent; the tool writes the replay
// script, the problem file and the golden MAG produced by the engine.
// Goldens are frozen artifacts: rerun this after any prompt-template change
// and review the diff.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dr/agent_backend.hpp"
#include "dr/answer_eval.hpp"
#include "dr/debate_engine.hpp"
#include "dr/errors.hpp"
#include "dr/mag.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct FixturePlan {
    std::string name;
    dr::DebateProblem problem;
    std::vector<dr::AgentId> agents;
    // rounds[r][i]: answer of agent i in round r+1. Encodings:
    //   "FAIL"      response without an extractable answer
    //   "EMPTY"     empty completion
    //   "BARE:X"    the bare option letter "(X)"
    //   "PHRASE:X"  uses "The answer is X."
    //   "LONG:X"    long reasoning before the marker
    std::vector<std::vector<std::string>> rounds;
};

const std::string kMcInstruction =
    "Answer the multiple-choice question. There are 10 options (A-J); exactly one is correct.";
const std::string kMathInstruction = "Solve the math problem step by step.";

std::string long_reasoning(const std::string& agent) {
    std::string block;
    for (int i = 0; i < 12; ++i) {
        block += "Working through constraint " + std::to_string(i + 1) + ", " + agent +
                 " eliminates one branch of the search space and rechecks the remaining candidates "
                 "against the quantities given in the problem statement. ";
    }
    return block;
}

std::string response_text(const std::string& agent, int round, const std::string& spec) {
    if (spec == "EMPTY") return "";
    if (spec == "FAIL") {
        return "Round " + std::to_string(round) + ": " + agent +
               " could not settle on a single option and needs another pass over the problem.";
    }
    if (spec.rfind("BARE:", 0) == 0) return "(" + spec.substr(5) + ")";
    if (spec.rfind("PHRASE:", 0) == 0) {
        return "After comparing the options in round " + std::to_string(round) +
               ", the strongest candidate stands out. The answer is " + spec.substr(7) + ".";
    }
    if (spec.rfind("LONG:", 0) == 0) {
        return long_reasoning(agent) + "\nFinal Answer: " + spec.substr(5);
    }
    return "In round " + std::to_string(round) + ", " + agent +
           " checks each option against the problem and keeps the one consistent with every "
           "condition.\nFinal Answer: " + spec;
}

std::string reflection_text(const std::string& agent, int round) {
    return "Reviewing my round " + std::to_string(round) + " response, I (" + agent +
           ") relied on an unverified assumption in the middle step; next round I will re-derive "
           "that step from the given quantities before answering.";
}

std::string feedback_text(const std::string& author, const std::string& target, int round) {
    return author + " to " + target + ": your round " + std::to_string(round) +
           " answer contradicts the constraint fixed by the problem statement; recompute the "
           "middle step and compare the candidates again before choosing.";
}

// Mirrors the engine's grading: present iff the response text yields a
// normalizable answer.
bool present_and_correct(const std::string& text, const dr::DebateProblem& problem, bool& correct) {
    auto raw = dr::extract_final_answer(text, problem.task_kind);
    if (!raw) return false;
    try {
        correct = dr::is_correct(*raw, problem.gold_answer, problem.task_kind);
    } catch (const dr::NormalizeError&) {
        return false;
    }
    return true;
}

ordered_json script_record(const std::string& agent_key, int round, const std::string& text) {
    return ordered_json{{"agent", agent_key},
                        {"round", round},
                        {"text", text},
                        {"completion_tokens", dr::approx_token_count(text)}};
}

// Scripts cover responses for every planned round plus annotations for every
// round that does not reach consensus among present answers (the engine asks
// for those before moving on, including a final disagreeing round).
std::string build_script(const FixturePlan& plan, const std::string& key_prefix) {
    std::string out;
    for (size_t r = 0; r < plan.rounds.size(); ++r) {
        const int round = static_cast<int>(r) + 1;
        std::vector<std::string> texts;
        for (size_t i = 0; i < plan.agents.size(); ++i) {
            texts.push_back(response_text(plan.agents[i].name, round, plan.rounds[r][i]));
            out += script_record(key_prefix + plan.agents[i].name, round, texts.back()).dump() + "\n";
        }

        std::vector<size_t> correct_agents;
        std::vector<size_t> incorrect_agents;
        std::vector<std::string> canonicals;
        for (size_t i = 0; i < plan.agents.size(); ++i) {
            bool correct = false;
            if (!present_and_correct(texts[i], plan.problem, correct)) continue;
            (correct ? correct_agents : incorrect_agents).push_back(i);
            auto raw = dr::extract_final_answer(texts[i], plan.problem.task_kind);
            canonicals.push_back(dr::normalize_answer(*raw, plan.problem.task_kind));
        }
        const bool consensus_reached = !canonicals.empty() && dr::consensus(canonicals);
        if (consensus_reached) continue;

        for (size_t i : incorrect_agents) {
            out += script_record(key_prefix + plan.agents[i].name + ":reflect", round,
                                 reflection_text(plan.agents[i].name, round))
                       .dump() +
                   "\n";
        }
        for (size_t a : correct_agents) {
            for (size_t t : incorrect_agents) {
                out += script_record(key_prefix + plan.agents[a].name + ":feedback:" +
                                         plan.agents[t].name,
                                     round, feedback_text(plan.agents[a].name, plan.agents[t].name, round))
                           .dump() +
                       "\n";
            }
        }
    }
    return out;
}

ordered_json problem_json(const dr::DebateProblem& p) {
    return ordered_json{{"id", p.id},
                        {"instruction", p.instruction},
                        {"question", p.question},
                        {"gold_answer", p.gold_answer},
                        {"task_kind", dr::to_string(p.task_kind)}};
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::vector<dr::AgentId> four_agents() {
    return {{"S", dr::AgentRole::student},
            {"T1", dr::AgentRole::teacher},
            {"T2", dr::AgentRole::teacher},
            {"T3", dr::AgentRole::teacher}};
}

dr::DebateProblem mc_problem(const std::string& id, const std::string& question,
                             const std::string& gold) {
    return dr::DebateProblem{id, kMcInstruction, question, gold, dr::TaskKind::multiple_choice_10};
}

dr::DebateProblem math_problem(const std::string& id, const std::string& question,
                               const std::string& gold) {
    return dr::DebateProblem{id, kMathInstruction, question, gold, dr::TaskKind::free_form_math};
}

std::vector<FixturePlan> make_plans() {
    std::vector<FixturePlan> plans;

    plans.push_back({"01_consensus_r1_all_correct_mc",
                     mc_problem("fx01", "Which option names the only prime in the list?", "B"),
                     four_agents(),
                     {{"B", "B", "B", "B"}}});
    plans.push_back({"02_consensus_r1_all_wrong_mc",
                     mc_problem("fx02", "Which option names the largest planet?", "B"),
                     four_agents(),
                     {{"C", "C", "C", "C"}}});
    plans.push_back({"03_correction_r2_mc",
                     mc_problem("fx03", "Which option satisfies both inequalities?", "B"),
                     four_agents(),
                     {{"C", "B", "B", "B"}, {"B", "B", "B", "B"}}});
    plans.push_back({"04_correction_r2_math",
                     math_problem("fx04", "Compute 3 + 4.", "7"),
                     four_agents(),
                     {{"3", "7", "7", "7"}, {"7", "7", "7", "7"}}});
    plans.push_back({"05_disagree_r4_mc",
                     mc_problem("fx05", "Which option lists the correct ordering?", "B"),
                     four_agents(),
                     {{"C", "B", "B", "D"},
                      {"C", "B", "B", "D"},
                      {"C", "B", "B", "D"},
                      {"C", "B", "B", "D"}}});
    plans.push_back({"06_disagree_r4_math",
                     math_problem("fx06", "What is 6 times 7?", "42"),
                     four_agents(),
                     {{"41", "42", "42", "43"},
                      {"41", "42", "42", "43"},
                      {"41", "42", "42", "43"},
                      {"41", "42", "42", "43"}}});
    plans.push_back({"07_allfailed_r1_then_consensus_mc",
                     mc_problem("fx07", "Which option is a synonym of 'rapid'?", "A"),
                     four_agents(),
                     {{"FAIL", "FAIL", "FAIL", "FAIL"}, {"A", "A", "A", "A"}}});
    plans.push_back({"08_failed_agent_consensus_r1_mc",
                     mc_problem("fx08", "Which option balances the equation?", "B"),
                     four_agents(),
                     {{"EMPTY", "B", "B", "B"}}});
    plans.push_back({"09_failed_agent_disagree_mc",
                     mc_problem("fx09", "Which option is the odd one out?", "B"),
                     four_agents(),
                     {{"FAIL", "B", "C", "B"}, {"B", "B", "B", "B"}}});
    plans.push_back({"10_two_agents_mc",
                     mc_problem("fx10", "Which option completes the series?", "D"),
                     {{"S", dr::AgentRole::student}, {"T1", dr::AgentRole::teacher}},
                     {{"C", "D"}, {"D", "D"}}});
    plans.push_back({"11_two_agents_disagree_r4_math",
                     math_problem("fx11", "How many edges does a pentagonal prism have?", "15"),
                     {{"S", dr::AgentRole::student}, {"T1", dr::AgentRole::teacher}},
                     {{"14", "15"}, {"14", "15"}, {"14", "15"}, {"14", "15"}}});
    plans.push_back({"12_three_agents_mixed_mc",
                     mc_problem("fx12", "Which option follows from the premises?", "E"),
                     {{"S", dr::AgentRole::student},
                      {"T1", dr::AgentRole::teacher},
                      {"T2", dr::AgentRole::teacher}},
                     {{"A", "E", "C"}, {"E", "E", "C"}, {"E", "E", "E"}}});
    plans.push_back({"13_wrong_consensus_r2_math",
                     math_problem("fx13", "What is the sum of the first ten odd numbers?", "100"),
                     four_agents(),
                     {{"99", "100", "99", "100"}, {"99", "99", "99", "99"}}});
    plans.push_back({"14_markers_variation_mc",
                     mc_problem("fx14", "Which option is the correct translation?", "C"),
                     four_agents(),
                     {{"BARE:C", "PHRASE:C", "C", "C"}}});
    plans.push_back({"15_math_normalization_r1",
                     math_problem("fx15", "Solve for x: 2x = 6.", "x=3"),
                     four_agents(),
                     {{"3", "3.", "$3$", "3"}}});
    plans.push_back({"16_junk_answer_mc",
                     mc_problem("fx16", "Which option matches the definition?", "B"),
                     four_agents(),
                     {{"K", "B", "B", "B"}}});
    plans.push_back({"17_spill_long_si_math",
                     math_problem("fx17", "What is 2 to the power of 3?", "8"),
                     four_agents(),
                     {{"LONG:6", "LONG:8", "LONG:8", "LONG:8"}, {"8", "8", "8", "8"}}});
    plans.push_back({"18_last_round_annotations_mc",
                     mc_problem("fx18", "Which option names the capital city?", "A"),
                     {{"S", dr::AgentRole::student}, {"T1", dr::AgentRole::teacher}},
                     {{"B", "A"}, {"B", "A"}, {"B", "A"}, {"B", "A"}}});
    plans.push_back({"19_student_only_correct_mc",
                     mc_problem("fx19", "Which option cites the right theorem?", "F"),
                     four_agents(),
                     {{"F", "A", "B", "C"}, {"F", "F", "F", "F"}}});
    plans.push_back({"20_degenerate_middle_round_math",
                     math_problem("fx20", "How many faces does a cube have?", "6"),
                     four_agents(),
                     {{"5", "6", "6", "6"},
                      {"FAIL", "FAIL", "FAIL", "FAIL"},
                      {"6", "6", "6", "6"}}});
    return plans;
}

dr::DebateConfig config_for(const FixturePlan& plan, std::shared_ptr<dr::Backend> backend) {
    dr::DebateConfig config;
    config.max_rounds = 4;
    for (const dr::AgentId& agent : plan.agents) {
        config.agents.push_back(dr::AgentBinding{agent, backend});
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: dr-genfixtures <fixtures_dir>\n";
        return 2;
    }
    const fs::path root = argv[1];

    for (const FixturePlan& plan : make_plans()) {
        const std::string script = build_script(plan, "");
        write_file(root / "debates" / (plan.name + ".problem.json"),
                   problem_json(plan.problem).dump(2) + "\n");
        write_file(root / "debates" / (plan.name + ".script.jsonl"), script);

        auto backend = dr::ReplayBackend::from_jsonl(script, plan.name);
        dr::DebateOutcome outcome = dr::run_debate(plan.problem, config_for(plan, backend));
        if (outcome.error) {
            std::cerr << plan.name << ": debate aborted: " << *outcome.error << "\n";
            return 1;
        }
        if (outcome.mag.rounds_completed != static_cast<int>(plan.rounds.size())) {
            std::cerr << plan.name << ": expected " << plan.rounds.size() << " rounds, engine ran "
                      << outcome.mag.rounds_completed << "\n";
            return 1;
        }
        const std::vector<std::string> violations = dr::mag_validate(outcome.mag);
        if (!violations.empty()) {
            std::cerr << plan.name << ": invalid MAG: " << violations.front() << "\n";
            return 1;
        }
        write_file(root / "debates" / (plan.name + ".golden.mag.json"),
                   dr::mag_serialize(outcome.mag));
        std::cout << plan.name << " rounds=" << outcome.mag.rounds_completed
                  << " stop=" << dr::to_string(outcome.mag.stop_reason) << "\n";
    }

    // Multi-problem pipeline fixture: one script serves three debates through
    // scope-prefixed keys.
    {
        std::vector<FixturePlan> pipeline;
        auto base = make_plans();
        for (size_t idx : {size_t{0}, size_t{2}, size_t{4}}) {
            FixturePlan plan = base[idx];
            plan.problem.id = "pipe" + std::to_string(pipeline.size() + 1);
            pipeline.push_back(std::move(plan));
        }
        std::string script;
        std::string problems;
        for (const FixturePlan& plan : pipeline) {
            script += build_script(plan, plan.problem.id + "/");
            problems += problem_json(plan.problem).dump() + "\n";
        }
        write_file(root / "pipeline" / "script.jsonl", script);
        write_file(root / "pipeline" / "problems.jsonl", problems);
        std::cout << "pipeline fixture: " << pipeline.size() << " problems\n";
    }
    return 0;
}
