#include "dr/mag.hpp"

#include <algorithm>
#include <set>

#include "dr/answer_eval.hpp"
#include "dr/errors.hpp"
#include "dr/json_util.hpp"

namespace dr {

namespace {

constexpr int kSchemaVersion = 1;

const AgentId* find_agent(const MAG& mag, const AgentId& agent) {
    for (const AgentId& a : mag.agents) {
        if (a == agent) return &a;
    }
    return nullptr;
}

const ResponseNode* find_response(const MAG& mag, const std::string& agent_name, int round) {
    for (const ResponseNode& r : mag.responses) {
        if (r.round == round && r.agent.name == agent_name) return &r;
    }
    return nullptr;
}

int next_node_id(const MAG& mag) {
    return static_cast<int>(mag.responses.size() + mag.annotations.size());
}

int agent_index(const MAG& mag, const std::string& name) {
    for (size_t i = 0; i < mag.agents.size(); ++i) {
        if (mag.agents[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace

int mag_insert_response(MAG& mag, ResponseNode node) {
    if (!find_agent(mag, node.agent)) {
        throw ValidationError("insert_response: unknown agent '" + node.agent.name + "'");
    }
    if (node.round < 1 || node.round > mag.rounds_completed + 1) {
        throw ValidationError("insert_response: round gap (round " + std::to_string(node.round) +
                              ", rounds_completed " + std::to_string(mag.rounds_completed) + ")");
    }
    if (find_response(mag, node.agent.name, node.round)) {
        throw ValidationError("insert_response: duplicate response for (" + node.agent.name +
                              ", round " + std::to_string(node.round) + ")");
    }
    if (!node.final_answer && node.correct) {
        throw ValidationError("insert_response: absent final_answer requires correct=false");
    }
    node.node_id = next_node_id(mag);
    mag.rounds_completed = std::max(mag.rounds_completed, node.round);
    mag.responses.push_back(std::move(node));
    return mag.responses.back().node_id;
}

int mag_insert_annotation(MAG& mag, AnnotationNode node) {
    if (!find_agent(mag, node.author)) {
        throw ValidationError("insert_annotation: unknown author '" + node.author.name + "'");
    }
    if (!find_agent(mag, node.target)) {
        throw ValidationError("insert_annotation: unknown target '" + node.target.name + "'");
    }
    const ResponseNode* target_resp = find_response(mag, node.target.name, node.round);
    if (!target_resp) {
        throw ValidationError("insert_annotation: no response for target '" + node.target.name +
                              "' in round " + std::to_string(node.round));
    }
    if (target_resp->correct) {
        throw ValidationError("insert_annotation: target response of '" + node.target.name +
                              "' in round " + std::to_string(node.round) + " is correct");
    }
    if (node.kind == AnnotationKind::self_reflection) {
        if (!(node.author == node.target)) {
            throw ValidationError("insert_annotation: self_reflection requires author == target");
        }
    } else {
        if (node.author == node.target) {
            throw ValidationError("insert_annotation: teacher_feedback requires author != target");
        }
        const ResponseNode* author_resp = find_response(mag, node.author.name, node.round);
        if (!author_resp) {
            throw ValidationError("insert_annotation: no response for author '" + node.author.name +
                                  "' in round " + std::to_string(node.round));
        }
        if (!author_resp->correct) {
            throw ValidationError("insert_annotation: feedback author '" + node.author.name +
                                  "' was incorrect in round " + std::to_string(node.round));
        }
    }
    node.node_id = next_node_id(mag);
    mag.annotations.push_back(std::move(node));
    return mag.annotations.back().node_id;
}

RoundView mag_round_view(const MAG& mag, int round) {
    if (round < 1 || round > mag.rounds_completed) {
        throw ValidationError("round_view: round " + std::to_string(round) + " out of range [1, " +
                              std::to_string(mag.rounds_completed) + "]");
    }
    RoundView view;
    for (const AgentId& agent : mag.agents) {
        if (const ResponseNode* resp = find_response(mag, agent.name, round)) {
            view.emplace_back(resp);
        }
        for (const AnnotationNode& a : mag.annotations) {
            if (a.round == round && a.kind == AnnotationKind::self_reflection &&
                a.author.name == agent.name) {
                view.emplace_back(&a);
            }
        }
        // Feedback addressed to this agent, in author registration order.
        for (const AgentId& author : mag.agents) {
            for (const AnnotationNode& a : mag.annotations) {
                if (a.round == round && a.kind == AnnotationKind::teacher_feedback &&
                    a.target.name == agent.name && a.author.name == author.name) {
                    view.emplace_back(&a);
                }
            }
        }
    }
    return view;
}

std::vector<std::string> mag_validate(const MAG& mag, int max_rounds) {
    std::vector<std::string> v;
    auto flag = [&v](std::string msg) { v.push_back(std::move(msg)); };

    // Problem.
    if (mag.problem.gold_answer.empty()) flag("problem: empty gold_answer");
    if (mag.problem.task_kind == TaskKind::multiple_choice_10 &&
        !mag.problem.gold_answer.empty()) {
        const std::string& g = mag.problem.gold_answer;
        if (g.size() != 1 || g[0] < 'A' || g[0] > 'J') {
            flag("problem: multiple_choice_10 gold_answer '" + g + "' not in A-J");
        }
    }

    // Agents.
    std::set<std::string> names;
    int students = 0;
    for (const AgentId& a : mag.agents) {
        if (a.name.empty()) flag("agent with empty name");
        if (!names.insert(a.name).second) flag("duplicate agent name '" + a.name + "'");
        if (a.role == AgentRole::student) ++students;
    }
    if (students != 1) {
        flag("expected exactly one student agent, found " + std::to_string(students));
    }

    // Dense unique node ids across both node lists.
    std::set<int> ids;
    bool dup_ids = false;
    for (const ResponseNode& r : mag.responses) {
        if (!ids.insert(r.node_id).second) dup_ids = true;
    }
    for (const AnnotationNode& a : mag.annotations) {
        if (!ids.insert(a.node_id).second) dup_ids = true;
    }
    if (dup_ids) flag("duplicate node ids");
    const int n_nodes = static_cast<int>(mag.responses.size() + mag.annotations.size());
    if (!ids.empty() && (*ids.begin() != 0 || *ids.rbegin() != n_nodes - 1)) {
        flag("node ids not dense in [0, " + std::to_string(n_nodes - 1) + "]");
    }

    // Responses.
    int max_round = 0;
    std::set<std::pair<std::string, int>> response_keys;
    for (const ResponseNode& r : mag.responses) {
        if (r.round < 1) flag("node " + std::to_string(r.node_id) + ": round < 1");
        max_round = std::max(max_round, r.round);
        if (agent_index(mag, r.agent.name) < 0) {
            flag("node " + std::to_string(r.node_id) + ": unregistered agent '" + r.agent.name + "'");
        }
        if (!response_keys.insert({r.agent.name, r.round}).second) {
            flag("node " + std::to_string(r.node_id) + ": duplicate response for (" + r.agent.name +
                 ", round " + std::to_string(r.round) + ")");
        }
        if (r.token_usage < 0) flag("node " + std::to_string(r.node_id) + ": negative token_usage");
        bool expected_correct = false;
        if (r.final_answer) {
            try {
                expected_correct =
                    is_correct(*r.final_answer, mag.problem.gold_answer, mag.problem.task_kind);
            } catch (const NormalizeError&) {
                expected_correct = false;
            }
        }
        if (r.correct != expected_correct) {
            flag("node " + std::to_string(r.node_id) + ": correct flag does not match grading of '" +
                 r.final_answer.value_or("<absent>") + "'");
        }
    }
    if (mag.rounds_completed != max_round) {
        flag("rounds_completed " + std::to_string(mag.rounds_completed) +
             " != max round present " + std::to_string(max_round));
    }
    if (mag.rounds_completed > max_rounds) {
        flag("rounds_completed " + std::to_string(mag.rounds_completed) + " exceeds max rounds " +
             std::to_string(max_rounds));
    }
    for (int r = 1; r <= mag.rounds_completed; ++r) {
        bool any = std::any_of(mag.responses.begin(), mag.responses.end(),
                               [r](const ResponseNode& n) { return n.round == r; });
        if (!any) flag("round " + std::to_string(r) + " has no responses");
    }

    // Annotations.
    for (const AnnotationNode& a : mag.annotations) {
        const std::string id = std::to_string(a.node_id);
        if (agent_index(mag, a.author.name) < 0) flag("node " + id + ": unregistered author");
        if (agent_index(mag, a.target.name) < 0) flag("node " + id + ": unregistered target");
        const ResponseNode* target_resp = find_response(mag, a.target.name, a.round);
        if (!target_resp) {
            flag("node " + id + ": target '" + a.target.name + "' has no response in round " +
                 std::to_string(a.round));
        } else if (target_resp->correct) {
            flag("node " + id + ": annotation targets a correct response");
        }
        if (a.kind == AnnotationKind::self_reflection) {
            if (!(a.author == a.target)) flag("node " + id + ": self_reflection with author != target");
        } else {
            if (a.author == a.target) flag("node " + id + ": teacher_feedback with author == target");
            const ResponseNode* author_resp = find_response(mag, a.author.name, a.round);
            if (!author_resp) {
                flag("node " + id + ": feedback author '" + a.author.name +
                     "' has no response in round " + std::to_string(a.round));
            } else if (!author_resp->correct) {
                flag("node " + id + ": feedback author was incorrect");
            }
        }
    }

    return v;
}

namespace {

using jsonu::json;

json agent_to_json(const AgentId& a) {
    return json{{"name", a.name}, {"role", to_string(a.role)}};
}

AgentId agent_from_json(const json& j, const std::string& where) {
    jsonu::require_keys(j, {"name", "role"}, {}, where);
    return AgentId{jsonu::get_string(j, "name", where),
                   agent_role_from_string(jsonu::get_string(j, "role", where))};
}

}  // namespace

std::string mag_serialize(const MAG& mag) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["problem"] = json{{"id", mag.problem.id},
                          {"instruction", mag.problem.instruction},
                          {"question", mag.problem.question},
                          {"gold_answer", mag.problem.gold_answer},
                          {"task_kind", to_string(mag.problem.task_kind)}};
    doc["agents"] = json::array();
    for (const AgentId& a : mag.agents) doc["agents"].push_back(agent_to_json(a));
    doc["responses"] = json::array();
    for (const ResponseNode& r : mag.responses) {
        json node{{"node_id", r.node_id},
                  {"agent", agent_to_json(r.agent)},
                  {"round", r.round},
                  {"reasoning", r.reasoning},
                  {"final_answer", nullptr},
                  {"correct", r.correct},
                  {"token_usage", r.token_usage}};
        if (r.final_answer) node["final_answer"] = *r.final_answer;
        doc["responses"].push_back(std::move(node));
    }
    doc["annotations"] = json::array();
    for (const AnnotationNode& a : mag.annotations) {
        doc["annotations"].push_back(json{{"node_id", a.node_id},
                                          {"kind", to_string(a.kind)},
                                          {"author", agent_to_json(a.author)},
                                          {"target", agent_to_json(a.target)},
                                          {"round", a.round},
                                          {"text", a.text}});
    }
    doc["rounds_completed"] = mag.rounds_completed;
    doc["stop_reason"] = to_string(mag.stop_reason);
    return doc.dump(2) + "\n";
}

MAG mag_parse(const std::string& bytes) {
    const std::string where = "mag document";
    json doc = jsonu::parse(bytes, where);
    jsonu::require_keys(doc,
                        {"schema_version", "problem", "agents", "responses", "annotations",
                         "rounds_completed", "stop_reason"},
                        {}, where);
    const std::int64_t version = jsonu::get_int(doc, "schema_version", where);
    if (version != kSchemaVersion) {
        throw ParseError(where + ": unsupported schema_version " + std::to_string(version) +
                         " (expected " + std::to_string(kSchemaVersion) + ")");
    }

    MAG mag;
    const json& p = jsonu::get_member(doc, "problem", where);
    jsonu::require_keys(p, {"id", "instruction", "question", "gold_answer", "task_kind"}, {},
                        where + ".problem");
    mag.problem.id = jsonu::get_string(p, "id", where);
    mag.problem.instruction = jsonu::get_string(p, "instruction", where);
    mag.problem.question = jsonu::get_string(p, "question", where);
    mag.problem.gold_answer = jsonu::get_string(p, "gold_answer", where);
    mag.problem.task_kind = task_kind_from_string(jsonu::get_string(p, "task_kind", where));

    for (const json& a : jsonu::get_member(doc, "agents", where)) {
        mag.agents.push_back(agent_from_json(a, where + ".agents"));
    }
    for (const json& r : jsonu::get_member(doc, "responses", where)) {
        const std::string rw = where + ".responses";
        jsonu::require_keys(
            r, {"node_id", "agent", "round", "reasoning", "final_answer", "correct", "token_usage"},
            {}, rw);
        ResponseNode node;
        node.node_id = static_cast<int>(jsonu::get_int(r, "node_id", rw));
        node.agent = agent_from_json(r.at("agent"), rw + ".agent");
        node.round = static_cast<int>(jsonu::get_int(r, "round", rw));
        node.reasoning = jsonu::get_string(r, "reasoning", rw);
        if (!r.at("final_answer").is_null()) {
            node.final_answer = jsonu::get_string(r, "final_answer", rw);
        }
        node.correct = jsonu::get_bool(r, "correct", rw);
        node.token_usage = jsonu::get_int(r, "token_usage", rw);
        mag.responses.push_back(std::move(node));
    }
    for (const json& a : jsonu::get_member(doc, "annotations", where)) {
        const std::string aw = where + ".annotations";
        jsonu::require_keys(a, {"node_id", "kind", "author", "target", "round", "text"}, {}, aw);
        AnnotationNode node;
        node.node_id = static_cast<int>(jsonu::get_int(a, "node_id", aw));
        node.kind = annotation_kind_from_string(jsonu::get_string(a, "kind", aw));
        node.author = agent_from_json(a.at("author"), aw + ".author");
        node.target = agent_from_json(a.at("target"), aw + ".target");
        node.round = static_cast<int>(jsonu::get_int(a, "round", aw));
        node.text = jsonu::get_string(a, "text", aw);
        mag.annotations.push_back(std::move(node));
    }
    mag.rounds_completed = static_cast<int>(jsonu::get_int(doc, "rounds_completed", where));
    mag.stop_reason = stop_reason_from_string(jsonu::get_string(doc, "stop_reason", where));
    return mag;
}

const char* to_string(AnnotationKind kind) {
    return kind == AnnotationKind::self_reflection ? "self_reflection" : "teacher_feedback";
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::consensus: return "consensus";
        case StopReason::all_correct: return "all_correct";
        case StopReason::max_rounds: return "max_rounds";
    }
    return "max_rounds";
}

AnnotationKind annotation_kind_from_string(const std::string& s) {
    if (s == "self_reflection") return AnnotationKind::self_reflection;
    if (s == "teacher_feedback") return AnnotationKind::teacher_feedback;
    throw ParseError("unknown annotation kind '" + s + "'");
}

StopReason stop_reason_from_string(const std::string& s) {
    if (s == "consensus") return StopReason::consensus;
    if (s == "max_rounds") return StopReason::max_rounds;
    if (s == "all_correct") return StopReason::all_correct;
    throw ParseError("unknown stop reason '" + s + "'");
}

}  // namespace dr
