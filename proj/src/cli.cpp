#include "dr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "dr/config.hpp"
#include "dr/dataset_export.hpp"
#include "dr/debate_engine.hpp"
#include "dr/distill_losses.hpp"
#include "dr/errors.hpp"
#include "dr/json_util.hpp"
#include "dr/metrics_eval.hpp"
#include "dr/tree_builder.hpp"

namespace dr {

namespace {

namespace fs = std::filesystem;
using jsonu::json;

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<MAG> load_mag_dir(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().string().ends_with(".mag.json")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no *.mag.json files under '" + dir + "'");
    std::vector<MAG> mags;
    for (const fs::path& file : files) {
        MAG mag = mag_parse(read_file(file));
        std::vector<std::string> violations = mag_validate(mag);
        if (!violations.empty()) {
            throw ValidationError("'" + file.string() + "' is not a valid MAG: " + violations.front());
        }
        mags.push_back(std::move(mag));
    }
    return mags;
}

int cmd_debate(const std::string& problems_path, const std::string& config_path,
               const std::string& out_dir) {
    const PipelineConfig config = load_config(config_path);
    const DebateConfig debate = make_debate_config(config);
    const std::vector<DebateProblem> problems = load_problems(problems_path);

    std::vector<std::future<DebateOutcome>> futures;
    futures.reserve(problems.size());
    const int jobs = std::max(1, config.jobs);
    // Bounded fan-out: launch up to `jobs` debates ahead of the writer.
    size_t next = 0;
    auto launch = [&](size_t i) {
        futures.push_back(std::async(std::launch::async,
                                     [&debate, &problems, i] { return run_debate(problems[i], debate); }));
    };
    for (; next < problems.size() && next < static_cast<size_t>(jobs); ++next) launch(next);

    int failures = 0;
    for (size_t i = 0; i < problems.size(); ++i) {
        DebateOutcome outcome = futures[i].get();
        if (next < problems.size()) launch(next++);
        for (const std::string& w : outcome.warnings) {
            std::cerr << problems[i].id << ": " << w << "\n";
        }
        if (outcome.error) {
            std::cerr << problems[i].id << ": " << *outcome.error << "\n";
            ++failures;
            continue;
        }
        const fs::path path = fs::path(out_dir) / (problems[i].id + ".mag.json");
        write_file(path, mag_serialize(outcome.mag));
        std::cout << path.string() << " rounds=" << outcome.mag.rounds_completed
                  << " stop=" << to_string(outcome.mag.stop_reason) << "\n";
    }
    if (failures > 0) {
        std::cerr << failures << " of " << problems.size() << " debates failed\n";
        return 1;
    }
    return 0;
}

int cmd_trees(const std::string& mags_dir, const std::string& out_path,
              const std::string& config_path) {
    PipelineConfig config;
    if (!config_path.empty()) config = load_config(config_path);
    const TreeBuildConfig tree_cfg = make_tree_config(config);

    std::vector<PreferenceTree> trees;
    for (const MAG& mag : load_mag_dir(mags_dir)) {
        std::vector<PreferenceTree> built = build_trees(mag, tree_cfg);
        trees.insert(trees.end(), std::make_move_iterator(built.begin()),
                     std::make_move_iterator(built.end()));
    }
    std::ostringstream out;
    write_trees_jsonl(out, trees);
    write_file(out_path, out.str());
    std::cout << out_path << " trees=" << trees.size() << "\n";
    return 0;
}

int cmd_export(const std::string& mags_dir, const std::string& trees_path,
               const std::string& sft_path, const std::string& tdpo_path) {
    const std::vector<MAG> mags = load_mag_dir(mags_dir);
    const std::vector<SftExample> sft = export_sft(mags);
    std::ostringstream sft_out;
    write_sft_jsonl(sft_out, sft);
    write_file(sft_path, sft_out.str());

    std::istringstream trees_in(read_file(trees_path));
    const std::vector<PreferenceTree> trees = read_trees_jsonl(trees_in, trees_path);
    const std::vector<PreferenceExample> tdpo = export_tdpo(trees);
    std::ostringstream tdpo_out;
    write_tdpo_jsonl(tdpo_out, tdpo);
    write_file(tdpo_path, tdpo_out.str());

    std::cout << sft_path << " sft=" << sft.size() << "\n"
              << tdpo_path << " tdpo=" << tdpo.size() << "\n";
    return 0;
}

int cmd_stats(const std::string& mags_dir, const std::string& trees_path,
              const std::string& out_path) {
    const std::vector<MAG> mags = load_mag_dir(mags_dir);
    std::istringstream trees_in(read_file(trees_path));
    const std::vector<PreferenceTree> trees = read_trees_jsonl(trees_in, trees_path);
    const std::vector<SftExample> sft = export_sft(mags);
    const DebateStats stats = compute_stats(mags, trees, sft);
    const std::string doc = stats_to_json(stats);
    write_file(out_path, doc);
    std::cout << doc;
    return 0;
}

// Deterministic demo setup: a small random-ish policy and batches with
// reference log-probs taken from a perturbed copy.
int cmd_losscheck(double beta, double alpha) {
    const int contexts = 3;
    const int vocab = 4;
    ToyPolicy policy = ToyPolicy::uniform(contexts, vocab);
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    auto next_unit = [&state]() {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>((state >> 11) & 0xFFFFF) / static_cast<double>(0xFFFFF);
    };
    for (double& p : policy.params) p = 2.0 * next_unit() - 1.0;

    std::vector<SftItem> sft_batch;
    PreferenceBatch pref;
    for (int c = 0; c < contexts; ++c) {
        SftItem item{c, {c % vocab, (c + 1) % vocab, (c + 2) % vocab}};
        sft_batch.push_back(item);
        PreferenceItem p;
        p.prompt_id = c;
        p.chosen_tokens = {c % vocab, (c + 1) % vocab};
        p.rejected_tokens = {(c + 2) % vocab, (c + 3) % vocab};
        p.ref_logp_chosen = seq_logprob(policy, c, p.chosen_tokens) + (next_unit() - 0.5);
        p.ref_logp_rejected = seq_logprob(policy, c, p.rejected_tokens) + (next_unit() - 0.5);
        pref.items.push_back(std::move(p));
    }

    LossConfig cfg;
    cfg.beta = beta;
    cfg.alpha = alpha;

    const double eps = 1e-5;
    json report;
    {
        LossFn fn{[&](const ToyPolicy& p) { return sft_loss(p, sft_batch, cfg); },
                  [&](const ToyPolicy& p) { return sft_loss_grad(p, sft_batch, cfg); }};
        report["sft"] = json{{"loss", sft_loss(policy, sft_batch, cfg)},
                             {"max_rel_err", grad_check(fn, policy, eps)}};
    }
    {
        LossFn fn{[&](const ToyPolicy& p) { return tdpo_loss(p, pref, cfg).loss; },
                  [&](const ToyPolicy& p) { return tdpo_loss_grad(p, pref, cfg); }};
        report["tdpo"] = json{{"loss", tdpo_loss(policy, pref, cfg).loss},
                              {"max_rel_err", grad_check(fn, policy, eps)}};
    }
    {
        LossFn fn{[&](const ToyPolicy& p) { return rpo_loss(p, pref, cfg); },
                  [&](const ToyPolicy& p) { return rpo_loss_grad(p, pref, cfg); }};
        report["rpo"] = json{{"loss", rpo_loss(policy, pref, cfg)},
                             {"max_rel_err", grad_check(fn, policy, eps)}};
    }
    {
        // Identity check: with references equal to the policy log-probs the
        // T-DPO loss is ln 2.
        PreferenceBatch at_ref = pref;
        for (PreferenceItem& item : at_ref.items) {
            item.ref_logp_chosen = seq_logprob(policy, item.prompt_id, item.chosen_tokens);
            item.ref_logp_rejected = seq_logprob(policy, item.prompt_id, item.rejected_tokens);
        }
        report["tdpo_at_reference"] = tdpo_loss(policy, at_ref, cfg).loss;
    }
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& records_path, const std::string& out_path,
             const std::string& csv_path) {
    std::vector<EvalRecord> records;
    {
        std::istringstream in(read_file(records_path));
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const std::string where = records_path + ":" + std::to_string(line_no);
            json j = jsonu::parse(line, where);
            jsonu::require_keys(j, {"problem_id", "predicted", "gold", "task_kind", "total_tokens"},
                                {}, where);
            EvalRecord r;
            r.problem_id = jsonu::get_string(j, "problem_id", where);
            r.predicted = jsonu::get_string(j, "predicted", where);
            r.gold = jsonu::get_string(j, "gold", where);
            r.task_kind = task_kind_from_string(jsonu::get_string(j, "task_kind", where));
            r.total_tokens = jsonu::get_int(j, "total_tokens", where);
            records.push_back(std::move(r));
        }
    }
    const double acc = accuracy(records);
    const EfficiencyReport eff = efficiency(records);
    json summary{{"accuracy", acc}, {"avg_tokens", eff.avg_tokens}, {"efficiency", eff.efficiency}};
    const std::string doc = summary.dump(2) + "\n";
    write_file(out_path, doc);

    std::ostringstream csv;
    csv << "problem_id,correct,total_tokens\n";
    for (const EvalRecord& r : records) {
        csv << r.problem_id << "," << (record_correct(r) ? 1 : 0) << "," << r.total_tokens << "\n";
    }
    write_file(csv_path, csv.str());
    std::cout << doc;
    return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
    CLI::App app{"Multi-agent debate distillation pipeline"};
    app.require_subcommand(1);

    std::string problems_path;
    std::string config_path;
    std::string out_dir;
    CLI::App* debate = app.add_subcommand("debate", "Run debates and write one MAG per problem");
    debate->add_option("--problems", problems_path, "Problems JSONL file")->required();
    debate->add_option("--config", config_path, "Pipeline config JSON")->required();
    debate->add_option("--out", out_dir, "Output directory for <problem_id>.mag.json")->required();

    std::string mags_dir;
    std::string trees_out;
    std::string trees_config;
    CLI::App* trees = app.add_subcommand("trees", "Build preference trees from MAGs");
    trees->add_option("--mags", mags_dir, "Directory of *.mag.json files")->required();
    trees->add_option("--out", trees_out, "Output trees JSONL")->required();
    trees->add_option("--config", trees_config, "Pipeline config JSON (optional)");

    std::string export_mags;
    std::string export_trees;
    std::string sft_out;
    std::string tdpo_out;
    CLI::App* exp = app.add_subcommand("export", "Write SFT and T-DPO training files");
    exp->add_option("--mags", export_mags, "Directory of *.mag.json files")->required();
    exp->add_option("--trees", export_trees, "Trees JSONL from `trees`")->required();
    exp->add_option("--sft", sft_out, "Output SFT JSONL")->required();
    exp->add_option("--tdpo", tdpo_out, "Output T-DPO JSONL")->required();

    std::string stats_mags;
    std::string stats_trees;
    std::string stats_out;
    CLI::App* stats = app.add_subcommand("stats", "Report corpus statistics");
    stats->add_option("--mags", stats_mags, "Directory of *.mag.json files")->required();
    stats->add_option("--trees", stats_trees, "Trees JSONL from `trees`")->required();
    stats->add_option("--out", stats_out, "Output stats JSON")->required();

    double beta = 0.1;
    double alpha = 1.0;
    CLI::App* losscheck = app.add_subcommand("losscheck", "Verify loss values and gradients");
    losscheck->add_option("--beta", beta, "T-DPO beta");
    losscheck->add_option("--alpha", alpha, "RPO alpha");

    std::string records_path;
    std::string eval_out;
    std::string csv_out;
    CLI::App* eval = app.add_subcommand("eval", "Accuracy and token-cost metrics");
    eval->add_option("--records", records_path, "Eval records JSONL")->required();
    eval->add_option("--out", eval_out, "Output summary JSON")->required();
    eval->add_option("--csv", csv_out, "Output per-problem CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (debate->parsed()) return cmd_debate(problems_path, config_path, out_dir);
        if (trees->parsed()) return cmd_trees(mags_dir, trees_out, trees_config);
        if (exp->parsed()) return cmd_export(export_mags, export_trees, sft_out, tdpo_out);
        if (stats->parsed()) return cmd_stats(stats_mags, stats_trees, stats_out);
        if (losscheck->parsed()) return cmd_losscheck(beta, alpha);
        if (eval->parsed()) return cmd_eval(records_path, eval_out, csv_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace dr
