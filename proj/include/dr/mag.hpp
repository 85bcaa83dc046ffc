#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dr/types.hpp"

namespace dr {

enum class AnnotationKind { self_reflection, teacher_feedback };
enum class StopReason { consensus, max_rounds, all_correct };

/// One agent's full response in one round. `reasoning` holds the complete
/// response text; `final_answer` is the raw extracted answer, absent for
/// failed responses (and then `correct` is false).
struct ResponseNode {
    int node_id = -1;
    AgentId agent;
    int round = 1;
    std::string reasoning;
    std::optional<std::string> final_answer;
    bool correct = false;
    std::int64_t token_usage = 0;

    friend bool operator==(const ResponseNode&, const ResponseNode&) = default;
};

/// A self-reflection (author critiques its own incorrect response) or
/// teacher feedback (a correct agent critiques an incorrect agent's
/// response). Edges are stored by agent reference so round views stay
/// order-stable.
struct AnnotationNode {
    int node_id = -1;
    AnnotationKind kind = AnnotationKind::self_reflection;
    AgentId author;
    AgentId target;
    int round = 1;
    std::string text;

    friend bool operator==(const AnnotationNode&, const AnnotationNode&) = default;
};

/// Multi-Agent Interaction Graph: the durable record of one debate.
/// Node ids are dense integers assigned in insertion order across responses
/// and annotations together.
struct MAG {
    DebateProblem problem;
    std::vector<AgentId> agents;
    std::vector<ResponseNode> responses;
    std::vector<AnnotationNode> annotations;
    int rounds_completed = 0;
    StopReason stop_reason = StopReason::max_rounds;

    friend bool operator==(const MAG&, const MAG&) = default;
};

using RoundViewItem = std::variant<const ResponseNode*, const AnnotationNode*>;

/// Responses and annotations of one round in canonical order: agents in
/// registration order; per agent its response, then its self-reflection,
/// then the feedback addressed to it in author registration order.
using RoundView = std::vector<RoundViewItem>;

/// Appends a response, assigning the next dense node id. The round must be
/// within [1, rounds_completed + 1]; the agent must be registered; one
/// response per (agent, round). Updates rounds_completed. Throws
/// ValidationError otherwise.
int mag_insert_response(MAG& mag, ResponseNode node);

/// Appends an annotation, assigning the next dense node id. The target's
/// response in that round must exist and be incorrect; self-reflections are
/// authored by the target itself; feedback requires a distinct author whose
/// own response that round is correct. Throws ValidationError otherwise.
int mag_insert_annotation(MAG& mag, AnnotationNode node);

RoundView mag_round_view(const MAG& mag, int round);

/// Checks every graph invariant and returns human-readable violations
/// carrying node ids. Empty result means the MAG is valid. Violations are
/// data, not failures.
std::vector<std::string> mag_validate(const MAG& mag, int max_rounds = 4);

/// UTF-8 JSON document with schema_version 1; see the project README for the
/// exact key set. mag_parse(mag_serialize(m)) is structurally equal to m.
std::string mag_serialize(const MAG& mag);
MAG mag_parse(const std::string& bytes);

const char* to_string(AnnotationKind kind);
const char* to_string(StopReason reason);
AnnotationKind annotation_kind_from_string(const std::string& s);
StopReason stop_reason_from_string(const std::string& s);

}  // namespace dr
