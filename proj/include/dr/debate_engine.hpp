#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dr/agent_backend.hpp"
#include "dr/mag.hpp"

namespace dr {

enum class SiKind { response, self_reflection, teacher_feedback };

const char* to_string(SiKind kind);
SiKind si_kind_from_string(const std::string& s);

/// One item of structured information: a previous-round response,
/// self-reflection or feedback. `agent` is the author of the text.
struct SiItem {
    std::string agent;
    SiKind kind = SiKind::response;
    std::string text;
    int round = 1;

    friend bool operator==(const SiItem&, const SiItem&) = default;
};

/// The previous round's responses and annotations, in round-view order, as
/// embedded in next-round prompts and preference-tree roots. Failed
/// responses are filtered out.
struct StructuredInformation {
    std::vector<SiItem> items;

    friend bool operator==(const StructuredInformation&, const StructuredInformation&) = default;
};

struct AgentBinding {
    AgentId id;
    std::shared_ptr<Backend> backend;
};

struct DebateConfig {
    int max_rounds = 4;
    std::vector<AgentBinding> agents;
    GenConfig gen;
    bool si_enabled = true;
};

/// run_debate result. `error` is set when a backend failure aborted the
/// debate; the MAG then holds every round completed before the failure and
/// keeps stop_reason max_rounds.
struct DebateOutcome {
    MAG mag;
    std::optional<std::string> error;
    std::vector<std::string> warnings;
};

struct GradedAnswer {
    std::optional<std::string> raw;
    std::optional<std::string> canonical;
    bool correct = false;
};

struct RoundGrade {
    std::vector<GradedAnswer> answers;
    bool consensus = false;
    bool all_correct = false;
    bool degenerate = false;  // every response failed
};

struct AnnotationBatch {
    std::vector<AnnotationNode> nodes;
    std::vector<std::string> warnings;
};

/// Shared prompt renderer: instruction, question, the optional structured
/// information section ("[<agent>/<kind>]: <text>" per item) and the
/// answer-format directive for the task kind. Preference-tree roots render
/// through the same function, so training prompts match debate prompts.
std::string render_prompt(const DebateProblem& problem, const StructuredInformation& si,
                          std::optional<int> soft_word_limit = std::nullopt);

/// Per-agent debate prompt for one round. `si` is absent exactly in round 1.
/// Agents in the same round share one prompt; `agent` is reserved.
std::string build_round_prompt(const DebateProblem& problem,
                               const std::optional<StructuredInformation>& si, const AgentId& agent,
                               std::optional<int> soft_word_limit = std::nullopt);

std::string build_reflection_prompt(const DebateProblem& problem, const ResponseNode& own_response);
std::string build_feedback_prompt(const DebateProblem& problem, const ResponseNode& author_response,
                                  const ResponseNode& target_response);

/// Extracts and grades each response text. Consensus is computed over the
/// answers that are present; a round where every response failed is marked
/// degenerate (no consensus) and the debate continues.
RoundGrade grade_round(std::span<const std::string> response_texts, const std::string& gold,
                       TaskKind task_kind);

/// Generates one self-reflection per present incorrect agent and one
/// feedback per (present correct, present incorrect) pair for `round`.
/// Failed responses neither reflect nor give or receive feedback. Backend
/// failures skip that annotation and are reported in warnings.
AnnotationBatch collect_annotations(const MAG& mag, int round, const DebateConfig& config);

/// Structured information assembled from one finished round: round-view
/// order with failed responses filtered out.
StructuredInformation si_from_round(const MAG& mag, int round);

/// Runs the debate protocol: rounds of respond, grade, reflect and give
/// feedback until the present answers reach consensus or max_rounds is hit.
DebateOutcome run_debate(const DebateProblem& problem, const DebateConfig& config);

}  // namespace dr
