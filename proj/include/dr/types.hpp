#pragma once

#include <string>

namespace dr {

enum class AgentRole { teacher, student };

enum class TaskKind { multiple_choice_10, free_form_math };

/// Debate participant. Names are unique within one debate and exactly one
/// agent per debate carries the student role.
struct AgentId {
    std::string name;
    AgentRole role = AgentRole::teacher;

    friend bool operator==(const AgentId&, const AgentId&) = default;
};

/// One problem fed into a debate: instruction, question text and the gold
/// answer used for grading.
struct DebateProblem {
    std::string id;
    std::string instruction;
    std::string question;
    std::string gold_answer;
    TaskKind task_kind = TaskKind::multiple_choice_10;

    friend bool operator==(const DebateProblem&, const DebateProblem&) = default;
};

const char* to_string(AgentRole role);
const char* to_string(TaskKind kind);
AgentRole agent_role_from_string(const std::string& s);
TaskKind task_kind_from_string(const std::string& s);

}  // namespace dr
