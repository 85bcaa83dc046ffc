#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dr/mag.hpp"
#include "dr/tree_builder.hpp"

namespace dr {

/// One SFT record: instruction, problem and a full correct response. Carries
/// no structured information.
struct SftExample {
    std::string instruction;
    std::string problem;
    std::string answer;

    friend bool operator==(const SftExample&, const SftExample&) = default;
};

/// One preference record: the rendered root prompt plus the chosen and
/// rejected responses, copied verbatim.
struct PreferenceExample {
    std::string prompt;
    std::string chosen;
    std::string rejected;

    friend bool operator==(const PreferenceExample&, const PreferenceExample&) = default;
};

/// Corpus statistics, one row per dataset.
struct DebateStats {
    std::int64_t n_debates = 0;
    std::array<std::int64_t, 4> rounds_histogram{};  // debates finishing in round 1..4
    std::int64_t n_responses = 0;
    std::int64_t n_self_reflections = 0;
    std::int64_t n_teacher_feedback = 0;
    std::int64_t n_sft = 0;
    std::int64_t n_tdpo = 0;

    friend bool operator==(const DebateStats&, const DebateStats&) = default;
};

/// One example per correct response across all rounds, in MAG order then
/// node-id order.
std::vector<SftExample> export_sft(std::span<const MAG> mags);

/// One record per tree; the prompt is rendered exactly like the debate round
/// prompt with the packed structured information.
std::vector<PreferenceExample> export_tdpo(std::span<const PreferenceTree> trees);

DebateStats compute_stats(std::span<const MAG> mags, std::span<const PreferenceTree> trees,
                          std::span<const SftExample> sft);

// JSONL: one compact JSON object per line, UTF-8, "\n" line endings.
void write_sft_jsonl(std::ostream& out, std::span<const SftExample> examples);
std::vector<SftExample> read_sft_jsonl(std::istream& in, const std::string& origin = "sft.jsonl");
void write_tdpo_jsonl(std::ostream& out, std::span<const PreferenceExample> examples);
std::vector<PreferenceExample> read_tdpo_jsonl(std::istream& in,
                                               const std::string& origin = "tdpo.jsonl");

// Tree artifact files keep full provenance so export and stats can run later.
void write_trees_jsonl(std::ostream& out, std::span<const PreferenceTree> trees);
std::vector<PreferenceTree> read_trees_jsonl(std::istream& in,
                                             const std::string& origin = "trees.jsonl");

std::string stats_to_json(const DebateStats& stats);
DebateStats stats_from_json(const std::string& text);

}  // namespace dr
