#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dr/agent_backend.hpp"
#include "dr/debate_engine.hpp"
#include "dr/mag.hpp"

namespace dr {

enum class PairStrategy { all_pairs, first_pair };

const char* to_string(PairStrategy strategy);
PairStrategy pair_strategy_from_string(const std::string& s);

/// Root of a preference tree: the shared round prompt content.
struct TreeRoot {
    std::string instruction;
    std::string question;
    StructuredInformation si;

    friend bool operator==(const TreeRoot&, const TreeRoot&) = default;
};

struct TreeProvenance {
    int chosen_node_id = -1;
    int rejected_node_id = -1;
    int spill_index = 0;
    bool truncated_item = false;  // one SI item was cut down to fit the budget

    friend bool operator==(const TreeProvenance&, const TreeProvenance&) = default;
};

/// A preference tree: root prompt plus one chosen (correct) and one rejected
/// (incorrect) response from the same round of the same MAG. Round-1 trees
/// carry no structured information. task_kind travels along so the root
/// prompt re-renders with the right answer directive.
struct PreferenceTree {
    std::string problem_id;
    TaskKind task_kind = TaskKind::multiple_choice_10;
    int round = 1;
    TreeRoot root;
    std::string chosen;
    std::string rejected;
    TreeProvenance provenance;

    friend bool operator==(const PreferenceTree&, const PreferenceTree&) = default;
};

struct TreeBuildConfig {
    std::int64_t prompt_token_budget = 1400;
    PairStrategy pair_strategy = PairStrategy::all_pairs;
    std::optional<int> max_pairs_per_round;
    TokenCounter counter;  // empty = bytes/4 heuristic
};

struct ResponsePair {
    int round = 1;
    const ResponseNode* correct_node = nullptr;
    const ResponseNode* incorrect_node = nullptr;
};

/// All (correct, incorrect) response pairs per round, node-id ordered,
/// truncated at max_pairs_per_round; first_pair keeps only the first pair of
/// each round. Failed responses never participate.
std::vector<ResponsePair> enumerate_pairs(const MAG& mag, const TreeBuildConfig& cfg);

/// Structured information seen by `round`: empty for round 1, otherwise the
/// previous round's view with failed responses filtered out.
StructuredInformation trace_history(const MAG& mag, int round);

/// The tree's root prompt, byte-identical to the debate round prompt built
/// from the same content.
std::string render_root_prompt(const PreferenceTree& tree);

/// Greedily packs SI items into roots under the token budget. When an item
/// does not fit, the current tree is closed and a new tree with the same
/// chosen/rejected pair starts at that item (spill_index incremented). An
/// item that alone exceeds the budget is truncated to fit and flagged. Every
/// SI item lands in exactly one tree; at least one tree is emitted even for
/// empty SI. Throws ValidationError when the instruction+question prefix
/// alone busts the budget.
std::vector<PreferenceTree> pack_root(const DebateProblem& problem, int round,
                                      const StructuredInformation& si, const ResponsePair& pair,
                                      const TreeBuildConfig& cfg);

/// enumerate_pairs -> trace_history -> pack_root, ordered by (round, pair,
/// spill_index). Deterministic for a fixed MAG and config.
std::vector<PreferenceTree> build_trees(const MAG& mag, const TreeBuildConfig& cfg);

}  // namespace dr
