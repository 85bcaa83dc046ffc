#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dr/agent_backend.hpp"
#include "dr/distill_losses.hpp"
#include "dr/debate_engine.hpp"
#include "dr/tree_builder.hpp"
#include "dr/types.hpp"

namespace dr {

struct AgentSpec {
    std::string name;
    AgentRole role = AgentRole::teacher;
    std::string model;  // remote backends only
};

enum class BackendKind { replay, remote };

struct BackendSpec {
    BackendKind kind = BackendKind::replay;
    std::string script;  // replay script path
};

/// Everything the CLI needs, in one JSON file. Unknown keys are rejected at
/// every level; missing keys fall back to the defaults below.
struct PipelineConfig {
    // debate
    int max_rounds = 4;
    bool si_enabled = true;
    std::vector<AgentSpec> agents;
    GenConfig gen{0.3, 700, std::nullopt};
    BackendSpec backend;
    // tree
    std::int64_t prompt_token_budget = 1400;
    PairStrategy pair_strategy = PairStrategy::all_pairs;
    std::optional<int> max_pairs_per_round;
    // loss
    LossConfig loss{0.1, 1.0, NllNormalization::per_token_mean};
    // io
    std::string out_dir = "out";
    int jobs = 1;
};

PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const std::string& text, const std::string& origin = "config");

/// Materializes debate agent bindings from the config: one shared replay
/// backend, or one remote backend per agent (model from the agent spec).
DebateConfig make_debate_config(const PipelineConfig& config);

TreeBuildConfig make_tree_config(const PipelineConfig& config);

/// Problems file: JSONL, one DebateProblem per line with keys
/// {"id","instruction","question","gold_answer","task_kind"}.
std::vector<DebateProblem> load_problems(const std::string& path);
std::vector<DebateProblem> parse_problems(const std::string& jsonl,
                                          const std::string& origin = "problems.jsonl");

}  // namespace dr
