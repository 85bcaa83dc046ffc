#include "dr/metrics_eval.hpp"

#include <numeric>

#include "dr/answer_eval.hpp"
#include "dr/errors.hpp"

namespace dr {

bool record_correct(const EvalRecord& record) {
    try {
        return is_correct(record.predicted, record.gold, record.task_kind);
    } catch (const NormalizeError&) {
        return false;
    }
}

double accuracy(std::span<const EvalRecord> records) {
    if (records.empty()) throw ValidationError("accuracy over an empty record set");
    std::int64_t correct = 0;
    for (const EvalRecord& r : records) {
        if (record_correct(r)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

double macro_average(std::span<const double> values) {
    if (values.empty()) throw ValidationError("macro_average over an empty list");
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

EfficiencyReport efficiency_from_avg(double avg_tokens) {
    if (avg_tokens == 0.0) throw ValidationError("efficiency undefined for avg_tokens = 0");
    return EfficiencyReport{avg_tokens, 1.0 / avg_tokens};
}

EfficiencyReport efficiency(std::span<const EvalRecord> records) {
    if (records.empty()) throw ValidationError("efficiency over an empty record set");
    double total = 0.0;
    for (const EvalRecord& r : records) total += static_cast<double>(r.total_tokens);
    return efficiency_from_avg(total / static_cast<double>(records.size()));
}

namespace {

std::string answer_line_directive(TaskKind kind) {
    if (kind == TaskKind::multiple_choice_10) {
        return "Then state your conclusion on a line \"Final Answer: <letter>\" where <letter> is "
               "one of A-J.";
    }
    return "Then state your conclusion on a line \"Final Answer: <answer>\".";
}

CorrectionResult run_correction(Backend& backend, const DebateProblem& problem,
                                std::string_view initial_response, const GenConfig& gen,
                                std::string prompt, const std::string& agent_key) {
    CorrectionResult result;
    result.total_tokens = 0;
    CompletionRequest req{std::move(prompt), agent_key, 1, problem.id, gen};
    try {
        Completion c = backend.complete(req);
        result.response_text = c.text;
        result.total_tokens = c.prompt_tokens + c.completion_tokens;
        result.answer = extract_final_answer(c.text, problem.task_kind);
    } catch (const EmptyCompletionError& e) {
        result.total_tokens = e.prompt_tokens + e.completion_tokens;
    }
    if (!result.answer) {
        // Answer-conservative fallback: keep the initial answer.
        result.answer = extract_final_answer(initial_response, problem.task_kind);
    }
    return result;
}

}  // namespace

std::string build_self_reflect_prompt(const DebateProblem& problem,
                                      std::string_view initial_response) {
    std::string out = problem.instruction;
    out += "\n\nProblem:\n";
    out += problem.question;
    out += "\n\nYour previous response was:\n";
    out += initial_response;
    out += "\n\nReflect on possible mistakes in this response and correct them if needed. ";
    out += answer_line_directive(problem.task_kind);
    out += "\n";
    return out;
}

std::string build_teacher_roleplay_prompt(const DebateProblem& problem,
                                          std::string_view initial_response) {
    std::string out = problem.instruction;
    out += "\n\nProblem:\n";
    out += problem.question;
    out += "\n\nYou are now acting as a teacher reviewing a student's response. The student's "
           "response was:\n";
    out += initial_response;
    out += "\n\nCritique the response as a teacher reviewing another agent's answer, and correct "
           "any errors. ";
    out += answer_line_directive(problem.task_kind);
    out += "\n";
    return out;
}

CorrectionResult self_reflect_correct(Backend& backend, const DebateProblem& problem,
                                      std::string_view initial_response, const GenConfig& gen) {
    return run_correction(backend, problem, initial_response, gen,
                          build_self_reflect_prompt(problem, initial_response),
                          problem.id + ":self_reflect");
}

CorrectionResult teacher_roleplay_correct(Backend& backend, const DebateProblem& problem,
                                          std::string_view initial_response, const GenConfig& gen) {
    return run_correction(backend, problem, initial_response, gen,
                          build_teacher_roleplay_prompt(problem, initial_response),
                          problem.id + ":teacher_roleplay");
}

}  // namespace dr
