#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dr/agent_backend.hpp"
#include "dr/types.hpp"

namespace dr {

/// One evaluated problem. total_tokens is prompt plus completion tokens for
/// the whole problem, summed over any correction calls, counted the same way
/// across compared systems.
struct EvalRecord {
    std::string problem_id;
    std::string predicted;
    std::string gold;
    TaskKind task_kind = TaskKind::multiple_choice_10;
    std::int64_t total_tokens = 0;
};

/// Fraction of records graded correct. Predictions that fail to normalize
/// count as incorrect.
double accuracy(std::span<const EvalRecord> records);

/// Whether one record grades correct (normalization failures = incorrect).
bool record_correct(const EvalRecord& record);

/// Plain mean, used for macro-averaging per-set accuracies or token costs.
double macro_average(std::span<const double> values);

struct EfficiencyReport {
    double avg_tokens = 0.0;
    double efficiency = 0.0;  // 1 / avg_tokens
};

EfficiencyReport efficiency(std::span<const EvalRecord> records);
EfficiencyReport efficiency_from_avg(double avg_tokens);

/// Outcome of one inference-time correction call. `answer` falls back to the
/// answer extracted from the initial response when the correction text has
/// no extractable answer.
struct CorrectionResult {
    std::optional<std::string> answer;
    std::string response_text;
    std::int64_t total_tokens = 0;
};

std::string build_self_reflect_prompt(const DebateProblem& problem,
                                      std::string_view initial_response);
std::string build_teacher_roleplay_prompt(const DebateProblem& problem,
                                          std::string_view initial_response);

/// The model re-reads its own response, reflects and restates the answer.
CorrectionResult self_reflect_correct(Backend& backend, const DebateProblem& problem,
                                      std::string_view initial_response, const GenConfig& gen);

/// The model roleplays a teacher reviewing the response and restates the
/// answer (teacher and student are the same model).
CorrectionResult teacher_roleplay_correct(Backend& backend, const DebateProblem& problem,
                                          std::string_view initial_response, const GenConfig& gen);

}  // namespace dr
