#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dr/types.hpp"

namespace dr {

/// A graded answer: the raw capture plus its canonical form.
struct Answer {
    std::string raw;
    std::string canonical;
    TaskKind task_kind = TaskKind::multiple_choice_10;
};

/// Pulls the final answer out of free-form response text.
///
/// The capture is the remainder of the line after the last occurrence of
/// "Final Answer:" or "The answer is" (case-insensitive), trimmed; marker
/// occurrences with an empty capture are skipped. For multiple choice, a
/// response that consists of nothing but an option letter (possibly wrapped
/// as "(B)" or followed by a period) is accepted as-is. Returns nullopt when
/// nothing matches; callers treat that as a failed response.
std::optional<std::string> extract_final_answer(std::string_view text, TaskKind task_kind);

/// Canonicalizes a raw answer.
///
/// multiple_choice_10: strip whitespace, parentheses and periods, uppercase;
/// the result must be a single letter A-J or NormalizeError is thrown.
///
/// free_form_math applies, in order: trim; collapse internal whitespace;
/// delete "\left", "\right", "\!", "\,"; strip surrounding '$'; strip
/// trailing periods; strip a leading "x="; lowercase the content of
/// \text{...}. The pass is iterated to a fixpoint so normalization is
/// idempotent even when one rewrite exposes material for another.
std::string normalize_answer(std::string_view raw, TaskKind task_kind);

/// Byte equality of the two canonical forms. Normalization errors propagate.
bool is_correct(std::string_view answer, std::string_view gold, TaskKind task_kind);

/// True iff all canonical answers agree. The list must be nonempty; failed
/// responses are excluded before this is called.
bool consensus(std::span<const std::string> canonical_answers);

}  // namespace dr
