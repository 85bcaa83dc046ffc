#include "dr/dataset_export.hpp"

#include <istream>
#include <ostream>

#include "dr/errors.hpp"
#include "dr/json_util.hpp"

namespace dr {

std::vector<SftExample> export_sft(std::span<const MAG> mags) {
    std::vector<SftExample> out;
    for (const MAG& mag : mags) {
        for (const ResponseNode& r : mag.responses) {
            if (!r.correct) continue;
            out.push_back(SftExample{mag.problem.instruction, mag.problem.question, r.reasoning});
        }
    }
    return out;
}

std::vector<PreferenceExample> export_tdpo(std::span<const PreferenceTree> trees) {
    std::vector<PreferenceExample> out;
    out.reserve(trees.size());
    for (const PreferenceTree& tree : trees) {
        out.push_back(PreferenceExample{render_root_prompt(tree), tree.chosen, tree.rejected});
    }
    return out;
}

DebateStats compute_stats(std::span<const MAG> mags, std::span<const PreferenceTree> trees,
                          std::span<const SftExample> sft) {
    DebateStats stats;
    stats.n_debates = static_cast<std::int64_t>(mags.size());
    for (const MAG& mag : mags) {
        if (mag.rounds_completed < 1 ||
            mag.rounds_completed > static_cast<int>(stats.rounds_histogram.size())) {
            throw ValidationError("compute_stats: MAG '" + mag.problem.id + "' has rounds_completed " +
                                  std::to_string(mag.rounds_completed) + " outside [1, 4]");
        }
        ++stats.rounds_histogram[mag.rounds_completed - 1];
        stats.n_responses += static_cast<std::int64_t>(mag.responses.size());
        for (const AnnotationNode& a : mag.annotations) {
            if (a.kind == AnnotationKind::self_reflection) {
                ++stats.n_self_reflections;
            } else {
                ++stats.n_teacher_feedback;
            }
        }
    }
    stats.n_sft = static_cast<std::int64_t>(sft.size());
    stats.n_tdpo = static_cast<std::int64_t>(trees.size());
    return stats;
}

namespace {

using jsonu::json;

std::vector<std::string> lines_of(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        lines.push_back(line);
    }
    return lines;
}

json si_item_to_json(const SiItem& item) {
    return json{{"agent", item.agent},
                {"kind", to_string(item.kind)},
                {"text", item.text},
                {"round", item.round}};
}

SiItem si_item_from_json(const json& j, const std::string& where) {
    jsonu::require_keys(j, {"agent", "kind", "text", "round"}, {}, where);
    return SiItem{jsonu::get_string(j, "agent", where),
                  si_kind_from_string(jsonu::get_string(j, "kind", where)),
                  jsonu::get_string(j, "text", where),
                  static_cast<int>(jsonu::get_int(j, "round", where))};
}

}  // namespace

void write_sft_jsonl(std::ostream& out, std::span<const SftExample> examples) {
    for (const SftExample& e : examples) {
        out << json{{"instruction", e.instruction}, {"problem", e.problem}, {"answer", e.answer}}
                   .dump()
            << "\n";
    }
}

std::vector<SftExample> read_sft_jsonl(std::istream& in, const std::string& origin) {
    std::vector<SftExample> out;
    int line_no = 0;
    for (const std::string& line : lines_of(in)) {
        const std::string where = origin + ":" + std::to_string(++line_no);
        json j = jsonu::parse(line, where);
        jsonu::require_keys(j, {"instruction", "problem", "answer"}, {}, where);
        out.push_back(SftExample{jsonu::get_string(j, "instruction", where),
                                 jsonu::get_string(j, "problem", where),
                                 jsonu::get_string(j, "answer", where)});
    }
    return out;
}

void write_tdpo_jsonl(std::ostream& out, std::span<const PreferenceExample> examples) {
    for (const PreferenceExample& e : examples) {
        out << json{{"prompt", e.prompt}, {"chosen", e.chosen}, {"rejected", e.rejected}}.dump()
            << "\n";
    }
}

std::vector<PreferenceExample> read_tdpo_jsonl(std::istream& in, const std::string& origin) {
    std::vector<PreferenceExample> out;
    int line_no = 0;
    for (const std::string& line : lines_of(in)) {
        const std::string where = origin + ":" + std::to_string(++line_no);
        json j = jsonu::parse(line, where);
        jsonu::require_keys(j, {"prompt", "chosen", "rejected"}, {}, where);
        out.push_back(PreferenceExample{jsonu::get_string(j, "prompt", where),
                                        jsonu::get_string(j, "chosen", where),
                                        jsonu::get_string(j, "rejected", where)});
    }
    return out;
}

void write_trees_jsonl(std::ostream& out, std::span<const PreferenceTree> trees) {
    for (const PreferenceTree& t : trees) {
        json root{{"instruction", t.root.instruction}, {"question", t.root.question}};
        root["si"] = json::array();
        for (const SiItem& item : t.root.si.items) root["si"].push_back(si_item_to_json(item));
        json j{{"problem_id", t.problem_id},
               {"task_kind", to_string(t.task_kind)},
               {"round", t.round},
               {"root", std::move(root)},
               {"chosen", t.chosen},
               {"rejected", t.rejected},
               {"provenance",
                json{{"chosen_node_id", t.provenance.chosen_node_id},
                     {"rejected_node_id", t.provenance.rejected_node_id},
                     {"spill_index", t.provenance.spill_index},
                     {"truncated_item", t.provenance.truncated_item}}}};
        out << j.dump() << "\n";
    }
}

std::vector<PreferenceTree> read_trees_jsonl(std::istream& in, const std::string& origin) {
    std::vector<PreferenceTree> out;
    int line_no = 0;
    for (const std::string& line : lines_of(in)) {
        const std::string where = origin + ":" + std::to_string(++line_no);
        json j = jsonu::parse(line, where);
        jsonu::require_keys(
            j, {"problem_id", "task_kind", "round", "root", "chosen", "rejected", "provenance"}, {},
            where);
        PreferenceTree t;
        t.problem_id = jsonu::get_string(j, "problem_id", where);
        t.task_kind = task_kind_from_string(jsonu::get_string(j, "task_kind", where));
        t.round = static_cast<int>(jsonu::get_int(j, "round", where));
        const json& root = j.at("root");
        jsonu::require_keys(root, {"instruction", "question", "si"}, {}, where + ".root");
        t.root.instruction = jsonu::get_string(root, "instruction", where);
        t.root.question = jsonu::get_string(root, "question", where);
        for (const json& item : root.at("si")) {
            t.root.si.items.push_back(si_item_from_json(item, where + ".root.si"));
        }
        t.chosen = jsonu::get_string(j, "chosen", where);
        t.rejected = jsonu::get_string(j, "rejected", where);
        const json& prov = j.at("provenance");
        jsonu::require_keys(prov,
                            {"chosen_node_id", "rejected_node_id", "spill_index", "truncated_item"},
                            {}, where + ".provenance");
        t.provenance.chosen_node_id = static_cast<int>(jsonu::get_int(prov, "chosen_node_id", where));
        t.provenance.rejected_node_id =
            static_cast<int>(jsonu::get_int(prov, "rejected_node_id", where));
        t.provenance.spill_index = static_cast<int>(jsonu::get_int(prov, "spill_index", where));
        t.provenance.truncated_item = jsonu::get_bool(prov, "truncated_item", where);
        out.push_back(std::move(t));
    }
    return out;
}

std::string stats_to_json(const DebateStats& stats) {
    json j;
    j["n_debates"] = stats.n_debates;
    j["rounds_histogram"] = stats.rounds_histogram;
    j["n_responses"] = stats.n_responses;
    j["n_self_reflections"] = stats.n_self_reflections;
    j["n_teacher_feedback"] = stats.n_teacher_feedback;
    j["n_sft"] = stats.n_sft;
    j["n_tdpo"] = stats.n_tdpo;
    return j.dump(2) + "\n";
}

DebateStats stats_from_json(const std::string& text) {
    const std::string where = "stats document";
    json j = jsonu::parse(text, where);
    jsonu::require_keys(j,
                        {"n_debates", "rounds_histogram", "n_responses", "n_self_reflections",
                         "n_teacher_feedback", "n_sft", "n_tdpo"},
                        {}, where);
    DebateStats stats;
    stats.n_debates = jsonu::get_int(j, "n_debates", where);
    const json& hist = j.at("rounds_histogram");
    if (!hist.is_array() || hist.size() != stats.rounds_histogram.size()) {
        throw ParseError(where + ": rounds_histogram must be an array of 4 integers");
    }
    for (size_t i = 0; i < stats.rounds_histogram.size(); ++i) {
        stats.rounds_histogram[i] = hist.at(i).get<std::int64_t>();
    }
    stats.n_responses = jsonu::get_int(j, "n_responses", where);
    stats.n_self_reflections = jsonu::get_int(j, "n_self_reflections", where);
    stats.n_teacher_feedback = jsonu::get_int(j, "n_teacher_feedback", where);
    stats.n_sft = jsonu::get_int(j, "n_sft", where);
    stats.n_tdpo = jsonu::get_int(j, "n_tdpo", where);
    return stats;
}

}  // namespace dr
