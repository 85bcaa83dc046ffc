#include "dr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dr/errors.hpp"
#include "dr/json_util.hpp"

namespace dr {

namespace {

using jsonu::json;

std::string slurp(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::string(what) + ": cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected a JSON object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(path + ": unknown key '" + key + "'");
    }
}

template <typename T>
T number_or(const json& obj, const char* key, T fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": must be an integer");
    } else {
        if (!v.is_number()) throw ConfigError(path + "." + key + ": must be a number");
    }
    return v.get<T>();
}

std::string string_or(const json& obj, const char* key, const std::string& fallback,
                      const std::string& path) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path + "." + key + ": must be a string");
    return v.get<std::string>();
}

bool bool_or(const json& obj, const char* key, bool fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(path + "." + key + ": must be a boolean");
    return v.get<bool>();
}

void parse_debate_section(const json& d, PipelineConfig& cfg) {
    check_keys(d, {"max_rounds", "si_enabled", "agents", "gen", "backend"}, "debate");
    cfg.max_rounds = number_or<int>(d, "max_rounds", cfg.max_rounds, "debate");
    if (cfg.max_rounds < 1) throw ConfigError("debate.max_rounds: must be >= 1");
    cfg.si_enabled = bool_or(d, "si_enabled", cfg.si_enabled, "debate");

    if (d.contains("agents")) {
        const json& agents = d.at("agents");
        if (!agents.is_array()) throw ConfigError("debate.agents: must be an array");
        std::set<std::string> names;
        int students = 0;
        for (size_t i = 0; i < agents.size(); ++i) {
            const std::string path = "debate.agents[" + std::to_string(i) + "]";
            const json& a = agents.at(i);
            check_keys(a, {"name", "role", "model"}, path);
            AgentSpec spec;
            spec.name = string_or(a, "name", "", path);
            if (spec.name.empty()) throw ConfigError(path + ".name: must be a nonempty string");
            if (!names.insert(spec.name).second) {
                throw ConfigError(path + ".name: duplicate agent '" + spec.name + "'");
            }
            try {
                spec.role = agent_role_from_string(string_or(a, "role", "teacher", path));
            } catch (const ParseError& e) {
                throw ConfigError(path + ".role: " + e.what());
            }
            if (spec.role == AgentRole::student) ++students;
            spec.model = string_or(a, "model", "", path);
            cfg.agents.push_back(std::move(spec));
        }
        if (!cfg.agents.empty() && students != 1) {
            throw ConfigError("debate.agents: expected exactly one student, found " +
                              std::to_string(students));
        }
    }

    if (d.contains("gen")) {
        const json& g = d.at("gen");
        check_keys(g, {"temperature", "max_tokens", "soft_word_limit"}, "debate.gen");
        cfg.gen.temperature = number_or<double>(g, "temperature", cfg.gen.temperature, "debate.gen");
        if (cfg.gen.temperature < 0) throw ConfigError("debate.gen.temperature: must be >= 0");
        cfg.gen.max_tokens = number_or<int>(g, "max_tokens", cfg.gen.max_tokens, "debate.gen");
        if (cfg.gen.max_tokens <= 0) throw ConfigError("debate.gen.max_tokens: must be > 0");
        if (g.contains("soft_word_limit") && !g.at("soft_word_limit").is_null()) {
            cfg.gen.soft_word_limit = number_or<int>(g, "soft_word_limit", 0, "debate.gen");
            if (*cfg.gen.soft_word_limit <= 0) {
                throw ConfigError("debate.gen.soft_word_limit: must be > 0");
            }
        }
    }

    if (d.contains("backend")) {
        const json& b = d.at("backend");
        check_keys(b, {"type", "script"}, "debate.backend");
        const std::string type = string_or(b, "type", "replay", "debate.backend");
        if (type == "replay") {
            cfg.backend.kind = BackendKind::replay;
        } else if (type == "remote") {
            cfg.backend.kind = BackendKind::remote;
        } else {
            throw ConfigError("debate.backend.type: unknown type '" + type + "'");
        }
        cfg.backend.script = string_or(b, "script", "", "debate.backend");
    }
}

void parse_tree_section(const json& t, PipelineConfig& cfg) {
    check_keys(t, {"prompt_token_budget", "pair_strategy", "max_pairs_per_round"}, "tree");
    cfg.prompt_token_budget =
        number_or<std::int64_t>(t, "prompt_token_budget", cfg.prompt_token_budget, "tree");
    if (cfg.prompt_token_budget <= 0) throw ConfigError("tree.prompt_token_budget: must be > 0");
    if (t.contains("pair_strategy")) {
        try {
            cfg.pair_strategy = pair_strategy_from_string(string_or(t, "pair_strategy", "", "tree"));
        } catch (const ParseError& e) {
            throw ConfigError(std::string("tree.pair_strategy: ") + e.what());
        }
    }
    if (t.contains("max_pairs_per_round") && !t.at("max_pairs_per_round").is_null()) {
        cfg.max_pairs_per_round = number_or<int>(t, "max_pairs_per_round", 0, "tree");
        if (*cfg.max_pairs_per_round < 1) {
            throw ConfigError("tree.max_pairs_per_round: must be >= 1");
        }
    }
}

void parse_loss_section(const json& l, PipelineConfig& cfg) {
    check_keys(l, {"beta", "alpha", "nll_normalization"}, "loss");
    cfg.loss.beta = number_or<double>(l, "beta", cfg.loss.beta, "loss");
    if (!(cfg.loss.beta > 0)) throw ConfigError("loss.beta: must be > 0");
    cfg.loss.alpha = number_or<double>(l, "alpha", cfg.loss.alpha, "loss");
    if (cfg.loss.alpha < 0) throw ConfigError("loss.alpha: must be >= 0");
    if (l.contains("nll_normalization")) {
        const std::string norm = string_or(l, "nll_normalization", "", "loss");
        if (norm == "per_token_mean") {
            cfg.loss.nll_normalization = NllNormalization::per_token_mean;
        } else if (norm == "sum") {
            cfg.loss.nll_normalization = NllNormalization::sum;
        } else {
            throw ConfigError("loss.nll_normalization: unknown value '" + norm + "'");
        }
    }
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    check_keys(doc, {"debate", "tree", "loss", "io"}, origin);

    PipelineConfig cfg;
    if (doc.contains("debate")) parse_debate_section(doc.at("debate"), cfg);
    if (doc.contains("tree")) parse_tree_section(doc.at("tree"), cfg);
    if (doc.contains("loss")) parse_loss_section(doc.at("loss"), cfg);
    if (doc.contains("io")) {
        const json& io = doc.at("io");
        check_keys(io, {"out_dir", "jobs"}, "io");
        cfg.out_dir = string_or(io, "out_dir", cfg.out_dir, "io");
        cfg.jobs = number_or<int>(io, "jobs", cfg.jobs, "io");
        if (cfg.jobs < 1) throw ConfigError("io.jobs: must be >= 1");
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    return parse_config(slurp(path, "config"), path);
}

DebateConfig make_debate_config(const PipelineConfig& config) {
    DebateConfig debate;
    debate.max_rounds = config.max_rounds;
    debate.si_enabled = config.si_enabled;
    debate.gen = config.gen;

    std::shared_ptr<Backend> shared_replay;
    if (config.backend.kind == BackendKind::replay) {
        if (config.backend.script.empty()) {
            throw ConfigError("debate.backend.script: required for replay backends");
        }
        shared_replay = ReplayBackend::load_script(config.backend.script);
    }
    for (const AgentSpec& spec : config.agents) {
        AgentBinding binding;
        binding.id = AgentId{spec.name, spec.role};
        if (config.backend.kind == BackendKind::replay) {
            binding.backend = shared_replay;
        } else {
            if (spec.model.empty()) {
                throw ConfigError("debate.agents: agent '" + spec.name +
                                  "' needs a model for remote backends");
            }
            binding.backend = RemoteBackend::from_env(spec.model);
        }
        debate.agents.push_back(std::move(binding));
    }
    return debate;
}

TreeBuildConfig make_tree_config(const PipelineConfig& config) {
    TreeBuildConfig tree;
    tree.prompt_token_budget = config.prompt_token_budget;
    tree.pair_strategy = config.pair_strategy;
    tree.max_pairs_per_round = config.max_pairs_per_round;
    return tree;
}

std::vector<DebateProblem> parse_problems(const std::string& jsonl, const std::string& origin) {
    std::vector<DebateProblem> problems;
    std::istringstream in(jsonl);
    std::string line;
    int line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        json j = jsonu::parse(line, where);
        jsonu::require_keys(j, {"id", "instruction", "question", "gold_answer", "task_kind"}, {},
                            where);
        DebateProblem p;
        p.id = jsonu::get_string(j, "id", where);
        p.instruction = jsonu::get_string(j, "instruction", where);
        p.question = jsonu::get_string(j, "question", where);
        p.gold_answer = jsonu::get_string(j, "gold_answer", where);
        p.task_kind = task_kind_from_string(jsonu::get_string(j, "task_kind", where));
        if (p.id.empty()) throw ParseError(where + ": empty problem id");
        if (!seen.insert(p.id).second) throw ParseError(where + ": duplicate problem id '" + p.id + "'");
        if (p.gold_answer.empty()) throw ParseError(where + ": empty gold_answer");
        problems.push_back(std::move(p));
    }
    if (problems.empty()) throw ParseError(origin + ": no problems");
    return problems;
}

std::vector<DebateProblem> load_problems(const std::string& path) {
    return parse_problems(slurp(path, "problems"), path);
}

}  // namespace dr
