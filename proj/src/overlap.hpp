#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minhash.hpp"

namespace curate {

enum class CountMode { documents, units };
CountMode parse_count_mode(std::string_view s);
std::string_view count_mode_name(CountMode m) noexcept;

// What a cluster weighs: removed documents (cluster_size - 1) or the units of
// every non-representative member.
std::uint64_t cluster_weight(const ConsensusRecord& r, CountMode mode) noexcept;

struct OverlapMatrix {
    std::vector<std::string> sources;
    std::vector<std::vector<std::uint64_t>> shared;
    std::vector<std::vector<double>> normalized;

    std::uint64_t at(std::string_view a, std::string_view b) const;
    double normalized_at(std::string_view a, std::string_view b) const;
    std::string raw_csv() const;
    std::string normalized_csv() const;
};

// Off-diagonal cells get each spanning cluster's full weight. The diagonal
// holds the source's own clustered documents (or their units). Normalized
// cells divide by the smaller of the two totals and are capped at 1.
OverlapMatrix pairwise_overlap(const std::vector<ConsensusRecord>& records, const std::vector<std::string>& sources,
                               const std::map<std::string, std::uint64_t>& totals, CountMode mode);

struct DepthBin {
    std::size_t depth = 0;
    std::uint64_t clusters = 0;
    std::uint64_t units = 0;
    double percent = 0.0;
};

struct DepthHistogram {
    std::vector<DepthBin> bins;  // depths 2..S
    // Clusters whose members all come from one source stay out of the bins.
    std::uint64_t single_source_clusters = 0;
    std::uint64_t single_source_units = 0;

    std::uint64_t cross_source_units() const;
    nlohmann::json to_json() const;
};

DepthHistogram depth_histogram(const std::vector<ConsensusRecord>& records, std::size_t source_count, CountMode mode);

struct SurvivalRow {
    std::string source;
    std::uint64_t before = 0;
    std::uint64_t after = 0;
    double survival = 0.0;
};

struct SurvivalTable {
    std::vector<SurvivalRow> rows;
    nlohmann::json to_json() const;
};

SurvivalTable survival_rates(const std::vector<std::string>& sources, const std::map<std::string, std::uint64_t>& before,
                             const std::map<std::string, std::uint64_t>& after);

struct AnalysisOptions {
    std::string consensus_path;
    std::string stats_path;  // stats.json of the minhash stage
    std::string output_dir;
    CountMode mode = CountMode::documents;
};

struct AnalysisResult {
    OverlapMatrix matrix;
    DepthHistogram histogram;
    SurvivalTable survival;
};

AnalysisResult analyze(const std::vector<ConsensusRecord>& records, const MinHashStats& stats, CountMode mode);

std::string render_analysis_markdown(const AnalysisResult& result, CountMode mode, std::string_view unit_label);

// Writes overlap_raw.csv, overlap_normalized.csv, depth_histogram.json,
// survival.json and analysis.md.
AnalysisResult run_analysis(const AnalysisOptions& options);

} // namespace curate
