#include "dr/types.hpp"

#include "dr/errors.hpp"

namespace dr {

const char* to_string(AgentRole role) {
    return role == AgentRole::teacher ? "teacher" : "student";
}

const char* to_string(TaskKind kind) {
    return kind == TaskKind::multiple_choice_10 ? "multiple_choice_10" : "free_form_math";
}

AgentRole agent_role_from_string(const std::string& s) {
    if (s == "teacher") return AgentRole::teacher;
    if (s == "student") return AgentRole::student;
    throw ParseError("unknown agent role '" + s + "'");
}

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "multiple_choice_10") return TaskKind::multiple_choice_10;
    if (s == "free_form_math") return TaskKind::free_form_math;
    throw ParseError("unknown task kind '" + s + "'");
}

}  // namespace dr
