#include "dr/debate_engine.hpp"

#include <algorithm>
#include <set>

#include "dr/answer_eval.hpp"
#include "dr/errors.hpp"

namespace dr {

const char* to_string(SiKind kind) {
    switch (kind) {
        case SiKind::response: return "response";
        case SiKind::self_reflection: return "self_reflection";
        case SiKind::teacher_feedback: return "teacher_feedback";
    }
    return "response";
}

SiKind si_kind_from_string(const std::string& s) {
    if (s == "response") return SiKind::response;
    if (s == "self_reflection") return SiKind::self_reflection;
    if (s == "teacher_feedback") return SiKind::teacher_feedback;
    throw ParseError("unknown structured-information kind '" + s + "'");
}

namespace {

std::string answer_directive(TaskKind kind) {
    if (kind == TaskKind::multiple_choice_10) {
        return "Give your step-by-step reasoning, then end with a line \"Final Answer: <letter>\" "
               "where <letter> is one of A-J.";
    }
    return "Give your step-by-step reasoning, then end with a line \"Final Answer: <answer>\".";
}

void validate_config(const DebateConfig& config) {
    if (config.max_rounds < 1) throw ConfigError("debate config: max_rounds must be >= 1");
    if (config.agents.size() < 2) throw ConfigError("debate config: at least 2 agents required");
    int students = 0;
    std::set<std::string> names;
    for (const AgentBinding& b : config.agents) {
        if (b.id.name.empty()) throw ConfigError("debate config: agent with empty name");
        if (!names.insert(b.id.name).second) {
            throw ConfigError("debate config: duplicate agent name '" + b.id.name + "'");
        }
        if (!b.backend) throw ConfigError("debate config: agent '" + b.id.name + "' has no backend");
        if (b.id.role == AgentRole::student) ++students;
    }
    if (students != 1) {
        throw ConfigError("debate config: expected exactly one student, found " +
                          std::to_string(students));
    }
}

const ResponseNode& response_of(const MAG& mag, const std::string& agent_name, int round) {
    for (const ResponseNode& r : mag.responses) {
        if (r.round == round && r.agent.name == agent_name) return r;
    }
    throw ValidationError("no response for '" + agent_name + "' in round " + std::to_string(round));
}

}  // namespace

std::string render_prompt(const DebateProblem& problem, const StructuredInformation& si,
                          std::optional<int> soft_word_limit) {
    std::string out = problem.instruction;
    out += "\n\nProblem:\n";
    out += problem.question;
    out += "\n";
    if (!si.items.empty()) {
        out += "\nStructured information from the previous debate round:\n";
        for (const SiItem& item : si.items) {
            out += "[";
            out += item.agent;
            out += "/";
            out += to_string(item.kind);
            out += "]: ";
            out += item.text;
            out += "\n";
        }
    }
    out += "\n";
    out += answer_directive(problem.task_kind);
    if (soft_word_limit) {
        out += " Keep your response within about " + std::to_string(*soft_word_limit) + " words.";
    }
    out += "\n";
    return out;
}

std::string build_round_prompt(const DebateProblem& problem,
                               const std::optional<StructuredInformation>& si,
                               [[maybe_unused]] const AgentId& agent,
                               std::optional<int> soft_word_limit) {
    return render_prompt(problem, si ? *si : StructuredInformation{}, soft_word_limit);
}

std::string build_reflection_prompt(const DebateProblem& problem, const ResponseNode& own_response) {
    std::string out = problem.instruction;
    out += "\n\nProblem:\n";
    out += problem.question;
    out += "\n\nYour previous response was:\n";
    out += own_response.reasoning;
    out += "\n\nYour final answer was graded incorrect. Identify the mistakes in your reasoning "
           "and describe how to correct them. Do not give a new final answer yet.\n";
    return out;
}

std::string build_feedback_prompt(const DebateProblem& problem, const ResponseNode& author_response,
                                  const ResponseNode& target_response) {
    std::string out = problem.instruction;
    out += "\n\nProblem:\n";
    out += problem.question;
    out += "\n\nYour own response, which was graded correct:\n";
    out += author_response.reasoning;
    out += "\n\nAgent \"";
    out += target_response.agent.name;
    out += "\" answered incorrectly:\n";
    out += target_response.reasoning;
    out += "\n\nPoint out the specific errors in \"";
    out += target_response.agent.name;
    out += "\"'s response and suggest concrete corrections.\n";
    return out;
}

RoundGrade grade_round(std::span<const std::string> response_texts, const std::string& gold,
                       TaskKind task_kind) {
    if (response_texts.empty()) throw ValidationError("grade_round: no responses");
    const std::string gold_canonical = normalize_answer(gold, task_kind);

    RoundGrade grade;
    grade.answers.resize(response_texts.size());
    std::vector<std::string> present;
    for (size_t i = 0; i < response_texts.size(); ++i) {
        GradedAnswer& a = grade.answers[i];
        std::optional<std::string> raw = extract_final_answer(response_texts[i], task_kind);
        if (!raw) continue;
        std::string canonical;
        try {
            canonical = normalize_answer(*raw, task_kind);
        } catch (const NormalizeError&) {
            // Unnormalizable extraction counts as a failed response.
            continue;
        }
        a.raw = std::move(raw);
        a.canonical = canonical;
        a.correct = canonical == gold_canonical;
        present.push_back(std::move(canonical));
    }
    grade.degenerate = present.empty();
    grade.consensus = !grade.degenerate && consensus(present);
    grade.all_correct =
        present.size() == response_texts.size() &&
        std::all_of(grade.answers.begin(), grade.answers.end(),
                    [](const GradedAnswer& a) { return a.correct; });
    return grade;
}

StructuredInformation si_from_round(const MAG& mag, int round) {
    StructuredInformation si;
    for (const RoundViewItem& item : mag_round_view(mag, round)) {
        if (std::holds_alternative<const ResponseNode*>(item)) {
            const ResponseNode* r = std::get<const ResponseNode*>(item);
            if (!r->final_answer) continue;  // failed responses are filtered out
            si.items.push_back(SiItem{r->agent.name, SiKind::response, r->reasoning, round});
        } else {
            const AnnotationNode* a = std::get<const AnnotationNode*>(item);
            SiKind kind = a->kind == AnnotationKind::self_reflection ? SiKind::self_reflection
                                                                     : SiKind::teacher_feedback;
            si.items.push_back(SiItem{a->author.name, kind, a->text, round});
        }
    }
    return si;
}

AnnotationBatch collect_annotations(const MAG& mag, int round, const DebateConfig& config) {
    AnnotationBatch batch;

    std::vector<const AgentBinding*> correct;
    std::vector<const AgentBinding*> incorrect;
    for (const AgentBinding& binding : config.agents) {
        const ResponseNode& resp = response_of(mag, binding.id.name, round);
        if (!resp.final_answer) continue;  // nothing to critique
        (resp.correct ? correct : incorrect).push_back(&binding);
    }

    for (const AgentBinding* agent : incorrect) {
        const ResponseNode& own = response_of(mag, agent->id.name, round);
        CompletionRequest req{build_reflection_prompt(mag.problem, own),
                              agent->id.name + ":reflect", round, mag.problem.id, config.gen};
        try {
            Completion c = agent->backend->complete(req);
            batch.nodes.push_back(AnnotationNode{-1, AnnotationKind::self_reflection, agent->id,
                                                 agent->id, round, c.text});
        } catch (const BackendError& e) {
            batch.warnings.push_back("skipped self_reflection by '" + agent->id.name + "' round " +
                                     std::to_string(round) + ": " + e.what());
        }
    }
    for (const AgentBinding* author : correct) {
        const ResponseNode& author_resp = response_of(mag, author->id.name, round);
        for (const AgentBinding* target : incorrect) {
            const ResponseNode& target_resp = response_of(mag, target->id.name, round);
            CompletionRequest req{build_feedback_prompt(mag.problem, author_resp, target_resp),
                                  author->id.name + ":feedback:" + target->id.name, round,
                                  mag.problem.id, config.gen};
            try {
                Completion c = author->backend->complete(req);
                batch.nodes.push_back(AnnotationNode{-1, AnnotationKind::teacher_feedback,
                                                     author->id, target->id, round, c.text});
            } catch (const BackendError& e) {
                batch.warnings.push_back("skipped teacher_feedback " + author->id.name + " -> " +
                                         target->id.name + " round " + std::to_string(round) + ": " +
                                         e.what());
            }
        }
    }
    return batch;
}

DebateOutcome run_debate(const DebateProblem& problem, const DebateConfig& config) {
    validate_config(config);
    if (problem.gold_answer.empty()) throw ValidationError("run_debate: empty gold_answer");

    DebateOutcome outcome;
    MAG& mag = outcome.mag;
    mag.problem = problem;
    for (const AgentBinding& b : config.agents) mag.agents.push_back(b.id);

    std::optional<StructuredInformation> si;
    for (int round = 1; round <= config.max_rounds; ++round) {
        std::vector<std::string> texts(config.agents.size());
        std::vector<std::int64_t> tokens(config.agents.size(), 0);
        for (size_t i = 0; i < config.agents.size(); ++i) {
            const AgentBinding& binding = config.agents[i];
            std::optional<StructuredInformation> prompt_si;
            if (round > 1 && config.si_enabled) prompt_si = si;
            CompletionRequest req{
                build_round_prompt(problem, prompt_si, binding.id, config.gen.soft_word_limit),
                binding.id.name, round, problem.id, config.gen};
            try {
                Completion c = binding.backend->complete(req);
                texts[i] = c.text;
                tokens[i] = c.prompt_tokens + c.completion_tokens;
            } catch (const EmptyCompletionError& e) {
                tokens[i] = e.prompt_tokens + e.completion_tokens;
            } catch (const BackendError& e) {
                // Abort: record what this round produced so far and return
                // the partial MAG with the error mark.
                if (i > 0) {
                    RoundGrade partial = grade_round({texts.data(), i}, problem.gold_answer,
                                                     problem.task_kind);
                    for (size_t k = 0; k < i; ++k) {
                        mag_insert_response(mag,
                                            ResponseNode{-1, config.agents[k].id, round, texts[k],
                                                         partial.answers[k].raw,
                                                         partial.answers[k].correct, tokens[k]});
                    }
                }
                outcome.error = "debate aborted in round " + std::to_string(round) + " at agent '" +
                                binding.id.name + "': " + e.what();
                return outcome;
            }
        }

        RoundGrade grade = grade_round(texts, problem.gold_answer, problem.task_kind);
        for (size_t i = 0; i < config.agents.size(); ++i) {
            mag_insert_response(mag, ResponseNode{-1, config.agents[i].id, round, texts[i],
                                                  grade.answers[i].raw, grade.answers[i].correct,
                                                  tokens[i]});
        }

        if (grade.consensus) {
            mag.stop_reason = grade.all_correct ? StopReason::all_correct : StopReason::consensus;
            return outcome;
        }

        AnnotationBatch annotations = collect_annotations(mag, round, config);
        for (AnnotationNode& node : annotations.nodes) {
            mag_insert_annotation(mag, std::move(node));
        }
        outcome.warnings.insert(outcome.warnings.end(), annotations.warnings.begin(),
                                annotations.warnings.end());
        si = si_from_round(mag, round);
    }
    mag.stop_reason = StopReason::max_rounds;
    return outcome;
}

}  // namespace dr
