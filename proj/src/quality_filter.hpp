#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpus_io.hpp"
#include "document.hpp"

namespace curate {

// Declaration order is evaluation order: evaluate_document reports the
// first failing check.
enum class Reason : std::uint8_t {
    empty_after_line_filter,
    no_alpha,
    lorem_ipsum,
    curly_brackets,
    too_short_chars,
    too_few_words,
    low_arabic_ratio,
    char_dup_ratio,
    excessive_repetition,
    terminal_punct_ratio,
    short_line_ratio,
    bullet_ratio,
    newline_ratio,
};

inline constexpr std::size_t kReasonCount = 13;

std::string_view reason_name(Reason r) noexcept;
std::string_view reason_label(Reason r) noexcept;
std::optional<Reason> parse_reason(std::string_view name) noexcept;

// Rows of the removal table, ordered by the usual magnitude of each filter on
// web text.
const std::array<Reason, kReasonCount>& reason_report_order() noexcept;

struct FilterConfig {
    double min_terminal_punct_ratio = 0.05;
    bool allow_zero_punct = true;
    double max_char_dup_ratio = 0.01;
    double max_short_line_ratio = 0.67;
    std::size_t short_line_max_chars = 30;
    double max_newlines_per_word = 0.5;
    std::size_t min_chars = 100;
    std::size_t min_words = 20;
    double min_arabic_alpha_ratio = 0.30;
    bool reject_curly = true;
    std::size_t max_word_chars = 100;
    double max_bullet_line_ratio = 0.90;
    std::size_t max_char_run = 20;
    std::vector<std::string> policy_phrases = default_policy_phrases();
    std::u32string terminal_punct_set = default_terminal_punct();

    static std::vector<std::string> default_policy_phrases();
    static std::u32string default_terminal_punct();

    // Throws UsageError naming the offending field.
    void validate() const;

    // Sets one field from its textual value (CLI override path).
    void set(std::string_view key, std::string_view value);

    // Overlays the keys present in `j`; unknown keys are a UsageError.
    void merge_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    static FilterConfig from_json(const nlohmann::json& j);
    static FilterConfig load(const std::string& path);

    bool is_terminal(char32_t c) const noexcept;
};

struct FilterVerdict {
    bool kept = true;
    std::optional<Reason> reason;

    static FilterVerdict keep() { return {}; }
    static FilterVerdict reject(Reason r) { return {false, r}; }
};

struct LineScrub {
    Document doc;
    std::size_t removed_lines = 0;
};

// Why a single line would be dropped by the line-level pass, if at all.
enum class LineRule : std::uint8_t { long_word, javascript, policy_phrase, too_few_words, citation };
std::optional<LineRule> line_rule(std::string_view line, const FilterConfig& cfg);

LineScrub filter_lines(const Document& doc, const FilterConfig& cfg);

double char_duplicate_ratio(std::string_view text);
double terminal_punct_line_ratio(std::string_view text, const FilterConfig& cfg);
double arabic_alpha_ratio(std::string_view text);
double short_line_ratio(std::string_view text, const FilterConfig& cfg);
double bullet_line_ratio(std::string_view text);
double newlines_per_word(std::string_view text);

struct RepetitionFlags {
    bool excessive_repetition = false;
    bool lorem_ipsum = false;
    bool no_alpha = false;
};
RepetitionFlags repetition_flags(std::string_view text, const FilterConfig& cfg);

// Expects the output of filter_lines.
FilterVerdict evaluate_document(const Document& doc, const FilterConfig& cfg);

// Every check that fails, evaluated independently and listed in evaluation
// order. Empty exactly when evaluate_document keeps the document.
std::vector<Reason> failing_checks(const Document& doc, const FilterConfig& cfg);

struct SourceFilterStats {
    std::uint64_t input_docs = 0;
    std::uint64_t output_docs = 0;
    std::uint64_t input_units = 0;
    std::uint64_t output_units = 0;
    std::uint64_t removed_lines = 0;
    std::uint64_t malformed = 0;
    std::array<std::uint64_t, kReasonCount> reasons{};

    std::uint64_t removed() const noexcept { return input_docs - output_docs; }
    void merge(const SourceFilterStats& o);
};

struct FilterStats {
    std::string unit_label = "words";
    // Keyed by source; `source_order` keeps the configured order for reports.
    std::map<std::string, SourceFilterStats> sources;
    std::vector<std::string> source_order;

    void merge(const FilterStats& o);
    SourceFilterStats total() const;

    nlohmann::json to_json() const;
    static FilterStats from_json(const nlohmann::json& j);
};

struct SourceInput {
    std::string name;
    std::string pattern;
};

struct FilterStageOptions {
    std::vector<SourceInput> inputs;
    std::string output_dir;
    FilterConfig config;
    CountUnit unit;
    unsigned threads = 0;
    bool compress = false;
};

struct FilterStageResult {
    FilterStats stats;
    ShardManifest manifest;
};

// Line-scrubs and evaluates every document. Shards are numbered globally in
// (source order, path order) and written one-to-one as
// <output_dir>/shard-NNNNN.jsonl, together with manifest.json and stats.json.
FilterStageResult run_filter_stage(const FilterStageOptions& options);

std::string shard_file_name(std::size_t index, bool compress);

} // namespace curate
