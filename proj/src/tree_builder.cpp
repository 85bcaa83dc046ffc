#include "dr/tree_builder.hpp"

#include <algorithm>

#include "dr/errors.hpp"

namespace dr {

const char* to_string(PairStrategy strategy) {
    return strategy == PairStrategy::all_pairs ? "all_pairs" : "first_pair";
}

PairStrategy pair_strategy_from_string(const std::string& s) {
    if (s == "all_pairs") return PairStrategy::all_pairs;
    if (s == "first_pair") return PairStrategy::first_pair;
    throw ParseError("unknown pair strategy '" + s + "'");
}

std::vector<ResponsePair> enumerate_pairs(const MAG& mag, const TreeBuildConfig& cfg) {
    std::vector<ResponsePair> pairs;
    for (int round = 1; round <= mag.rounds_completed; ++round) {
        std::vector<const ResponseNode*> correct;
        std::vector<const ResponseNode*> incorrect;
        for (const ResponseNode& r : mag.responses) {
            if (r.round != round || !r.final_answer) continue;
            (r.correct ? correct : incorrect).push_back(&r);
        }
        auto by_id = [](const ResponseNode* a, const ResponseNode* b) {
            return a->node_id < b->node_id;
        };
        std::sort(correct.begin(), correct.end(), by_id);
        std::sort(incorrect.begin(), incorrect.end(), by_id);

        int emitted = 0;
        for (const ResponseNode* c : correct) {
            for (const ResponseNode* i : incorrect) {
                if (cfg.pair_strategy == PairStrategy::first_pair && emitted >= 1) break;
                if (cfg.max_pairs_per_round && emitted >= *cfg.max_pairs_per_round) break;
                pairs.push_back(ResponsePair{round, c, i});
                ++emitted;
            }
        }
    }
    return pairs;
}

StructuredInformation trace_history(const MAG& mag, int round) {
    if (round < 1) throw ValidationError("trace_history: round must be >= 1");
    if (round > mag.rounds_completed) {
        throw ValidationError("trace_history: round " + std::to_string(round) + " beyond " +
                              std::to_string(mag.rounds_completed) + " completed rounds");
    }
    if (round == 1) return {};
    return si_from_round(mag, round - 1);
}

std::string render_root_prompt(const PreferenceTree& tree) {
    DebateProblem problem;
    problem.id = tree.problem_id;
    problem.instruction = tree.root.instruction;
    problem.question = tree.root.question;
    problem.task_kind = tree.task_kind;
    return render_prompt(problem, tree.root.si);
}

namespace {

std::string render_with_items(const DebateProblem& problem, const std::vector<SiItem>& items) {
    StructuredInformation si;
    si.items = items;
    return render_prompt(problem, si);
}

// Longest prefix of item.text whose rendering fits the budget, cut at a
// UTF-8 sequence boundary.
SiItem truncate_to_fit(const DebateProblem& problem, SiItem item, std::int64_t budget,
                       const TokenCounter& counter) {
    size_t lo = 0;
    size_t hi = item.text.size();
    while (lo < hi) {
        const size_t mid = (lo + hi + 1) / 2;
        SiItem probe = item;
        probe.text = item.text.substr(0, mid);
        if (count_tokens(counter, render_with_items(problem, {probe})) <= budget) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    while (lo > 0 && (static_cast<unsigned char>(item.text[lo]) & 0xC0) == 0x80) --lo;
    item.text = item.text.substr(0, lo);
    return item;
}

}  // namespace

std::vector<PreferenceTree> pack_root(const DebateProblem& problem, int round,
                                      const StructuredInformation& si, const ResponsePair& pair,
                                      const TreeBuildConfig& cfg) {
    if (cfg.prompt_token_budget <= 0) throw ValidationError("pack_root: budget must be > 0");
    if (count_tokens(cfg.counter, render_with_items(problem, {})) > cfg.prompt_token_budget) {
        throw ValidationError("pack_root: budget_too_small for problem '" + problem.id +
                              "' (instruction + question alone exceed " +
                              std::to_string(cfg.prompt_token_budget) + " tokens)");
    }

    auto make_tree = [&](std::vector<SiItem> items, int spill_index, bool truncated) {
        PreferenceTree tree;
        tree.problem_id = problem.id;
        tree.task_kind = problem.task_kind;
        tree.round = round;
        tree.root = TreeRoot{problem.instruction, problem.question,
                             StructuredInformation{std::move(items)}};
        tree.chosen = pair.correct_node->reasoning;
        tree.rejected = pair.incorrect_node->reasoning;
        tree.provenance = TreeProvenance{pair.correct_node->node_id, pair.incorrect_node->node_id,
                                         spill_index, truncated};
        return tree;
    };

    std::vector<PreferenceTree> trees;
    std::vector<SiItem> current;
    bool current_truncated = false;
    int spill_index = 0;
    for (const SiItem& item : si.items) {
        std::vector<SiItem> probe = current;
        probe.push_back(item);
        if (count_tokens(cfg.counter, render_with_items(problem, probe)) <= cfg.prompt_token_budget) {
            current = std::move(probe);
            continue;
        }
        if (!current.empty()) {
            trees.push_back(make_tree(std::move(current), spill_index++, current_truncated));
            current.clear();
            current_truncated = false;
        }
        if (count_tokens(cfg.counter, render_with_items(problem, {item})) <=
            cfg.prompt_token_budget) {
            current.push_back(item);
        } else {
            current.push_back(truncate_to_fit(problem, item, cfg.prompt_token_budget, cfg.counter));
            current_truncated = true;
        }
    }
    trees.push_back(make_tree(std::move(current), spill_index, current_truncated));
    return trees;
}

std::vector<PreferenceTree> build_trees(const MAG& mag, const TreeBuildConfig& cfg) {
    std::vector<PreferenceTree> trees;
    for (const ResponsePair& pair : enumerate_pairs(mag, cfg)) {
        StructuredInformation si = trace_history(mag, pair.round);
        std::vector<PreferenceTree> packed = pack_root(mag.problem, pair.round, si, pair, cfg);
        trees.insert(trees.end(), std::make_move_iterator(packed.begin()),
                     std::make_move_iterator(packed.end()));
    }
    return trees;
}

}  // namespace dr
