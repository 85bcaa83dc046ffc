#include "dr/answer_eval.hpp"

#include <algorithm>
#include <cctype>

#include "dr/errors.hpp"

namespace dr {

namespace {

bool is_ws(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Runs of whitespace become a single space.
std::string collapse_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (is_ws(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

std::string erase_all(std::string s, std::string_view token) {
    size_t pos = 0;
    while ((pos = s.find(token, pos)) != std::string::npos) {
        s.erase(pos, token.size());
    }
    return s;
}

// One pass of the math rewrite list, in the documented order.
std::string math_pass(const std::string& input) {
    std::string s = trim(input);
    s = collapse_whitespace(s);
    for (std::string_view tok : {"\\left", "\\right", "\\!", "\\,"}) {
        s = erase_all(s, tok);
    }
    while (!s.empty() && s.front() == '$') s.erase(s.begin());
    while (!s.empty() && s.back() == '$') s.pop_back();
    while (!s.empty() && s.back() == '.') s.pop_back();
    if (s.rfind("x=", 0) == 0) s.erase(0, 2);
    // Lowercase the content of every \text{...} group (non-nested braces).
    size_t pos = 0;
    while ((pos = s.find("\\text{", pos)) != std::string::npos) {
        size_t open = pos + 6;
        size_t close = s.find('}', open);
        if (close == std::string::npos) break;
        for (size_t i = open; i < close; ++i) {
            s[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
        }
        pos = close + 1;
    }
    return s;
}

std::string normalize_math(std::string_view raw) {
    std::string cur(raw);
    // Each changing pass strictly shrinks the string or reduces uppercase
    // letters, so this terminates.
    for (int i = 0; i < 64; ++i) {
        std::string next = math_pass(cur);
        if (next == cur) return cur;
        cur = std::move(next);
    }
    return cur;
}

std::string normalize_choice(std::string_view raw) {
    std::string s;
    for (char c : raw) {
        if (is_ws(c) || c == '(' || c == ')' || c == '.') continue;
        s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (s.size() != 1 || s[0] < 'A' || s[0] > 'J') {
        throw NormalizeError("option not in A-J: '" + std::string(raw) + "'");
    }
    return s;
}

// Remainder of the line starting at `from`, trimmed.
std::string capture_to_eol(std::string_view text, size_t from) {
    size_t end = text.find('\n', from);
    if (end == std::string::npos) end = text.size();
    return trim(text.substr(from, end - from));
}

}  // namespace

std::optional<std::string> extract_final_answer(std::string_view text, TaskKind task_kind) {
    static constexpr std::string_view kMarkers[] = {"final answer:", "the answer is"};
    const std::string lower = to_lower(text);

    std::optional<std::string> best;
    size_t best_pos = 0;
    for (std::string_view marker : kMarkers) {
        size_t pos = 0;
        while ((pos = lower.find(marker, pos)) != std::string::npos) {
            std::string cap = capture_to_eol(text, pos + marker.size());
            if (!cap.empty() && (!best || pos >= best_pos)) {
                best = cap;
                best_pos = pos;
            }
            ++pos;
        }
    }
    if (best) return best;

    if (task_kind == TaskKind::multiple_choice_10) {
        // Bare option letter, possibly "(B)" or "B.".
        std::string stripped;
        for (char c : text) {
            if (is_ws(c) || c == '(' || c == ')' || c == '.') continue;
            stripped.push_back(c);
        }
        if (stripped.size() == 1) {
            char u = static_cast<char>(std::toupper(static_cast<unsigned char>(stripped[0])));
            if (u >= 'A' && u <= 'J') return trim(text);
        }
    }
    return std::nullopt;
}

std::string normalize_answer(std::string_view raw, TaskKind task_kind) {
    if (raw.empty()) throw NormalizeError("empty answer");
    return task_kind == TaskKind::multiple_choice_10 ? normalize_choice(raw) : normalize_math(raw);
}

bool is_correct(std::string_view answer, std::string_view gold, TaskKind task_kind) {
    return normalize_answer(answer, task_kind) == normalize_answer(gold, task_kind);
}

bool consensus(std::span<const std::string> canonical_answers) {
    if (canonical_answers.empty()) throw ValidationError("consensus over an empty answer list");
    return std::all_of(canonical_answers.begin(), canonical_answers.end(),
                       [&](const std::string& a) { return a == canonical_answers.front(); });
}

}  // namespace dr
