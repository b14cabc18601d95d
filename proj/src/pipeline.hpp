#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minhash.hpp"
#include "overlap.hpp"
#include "quality_filter.hpp"
#include "sentence_dedup.hpp"

namespace curate {

struct SourceSpec {
    std::string name;
    std::string path;   // glob, resolved against the config directory
    int priority = 0;   // 1 is kept first; 0 means "by position"
};

struct PipelineConfig {
    std::string output_root;
    std::vector<SourceSpec> sources;
    FilterConfig filter;
    MinHashParams minhash;
    SpanParams span;
    CountUnit unit;
    CountMode analysis_mode = CountMode::documents;
    unsigned threads = 0;
    bool compress = false;

    void validate() const;
    // Source names from highest to lowest priority.
    std::vector<std::string> priority_order() const;
    std::vector<std::string> source_names() const;

    nlohmann::json to_json() const;
    // Relative paths in `j` are resolved against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
    static PipelineConfig load(const std::string& path);
};

enum class Stage { filter, minhash, sentdedup, analyze };
std::string_view stage_name(Stage s) noexcept;
// Comma-separated; empty means every stage. Output is in execution order.
std::vector<Stage> parse_stages(std::string_view csv);

struct StageCounts {
    std::uint64_t input_docs = 0;
    std::uint64_t output_docs = 0;
    std::uint64_t input_units = 0;
    std::uint64_t output_units = 0;

    double doc_reduction_pct() const noexcept;
    double unit_reduction_pct() const noexcept;
    StageCounts& operator+=(const StageCounts& o) noexcept;
};

struct StageSummary {
    std::string stage;
    std::map<std::string, StageCounts> sources;
    StageCounts total(const std::vector<std::string>& order) const;
};

struct StageReport {
    std::string unit_label = "words";
    std::vector<std::string> sources;
    std::vector<StageSummary> stages;

    nlohmann::json to_json() const;
    std::string to_csv() const;
    std::string to_markdown() const;
};

struct PipelineLayout {
    std::string filter_dir;
    std::string minhash_dir;
    std::string sentdedup_dir;
    std::string report_dir;

    explicit PipelineLayout(const std::string& root);
};

// Assembles the report from whichever stage stats exist under the output root.
StageReport collect_stage_report(const PipelineConfig& config);

// Runs the selected stages in order. Later stages read the persisted output
// of earlier ones, so a subset can be re-run on its own. The stage report is
// always rewritten from the stats on disk.
StageReport run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages);

} // namespace curate
