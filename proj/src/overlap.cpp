#include "overlap.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "corpus_io.hpp"
#include "error.hpp"

namespace fs = std::filesystem;

namespace curate {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::size_t index_of(const std::vector<std::string>& names, std::string_view name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("source '" + std::string(name) + "' has no totals");
    return static_cast<std::size_t>(it - names.begin());
}

std::uint64_t source_value(const SourceShare& s, CountMode mode) noexcept {
    return mode == CountMode::documents ? s.docs : s.units;
}

} // namespace

CountMode parse_count_mode(std::string_view s) {
    if (s == "documents" || s == "docs") return CountMode::documents;
    if (s == "units") return CountMode::units;
    throw UsageError("unknown count mode '" + std::string(s) + "' (expected documents or units)");
}

std::string_view count_mode_name(CountMode m) noexcept {
    return m == CountMode::documents ? "documents" : "units";
}

std::uint64_t cluster_weight(const ConsensusRecord& r, CountMode mode) noexcept {
    if (mode == CountMode::documents) return r.cluster_size > 0 ? r.cluster_size - 1 : 0;
    return r.units;
}

std::uint64_t OverlapMatrix::at(std::string_view a, std::string_view b) const {
    return shared[index_of(sources, a)][index_of(sources, b)];
}

double OverlapMatrix::normalized_at(std::string_view a, std::string_view b) const {
    return normalized[index_of(sources, a)][index_of(sources, b)];
}

std::string OverlapMatrix::raw_csv() const {
    std::string out = "source";
    for (const auto& s : sources) out += "," + s;
    out += "\n";
    for (std::size_t i = 0; i < sources.size(); ++i) {
        out += sources[i];
        for (std::size_t j = 0; j < sources.size(); ++j) out += "," + std::to_string(shared[i][j]);
        out += "\n";
    }
    return out;
}

std::string OverlapMatrix::normalized_csv() const {
    std::string out = "source";
    for (const auto& s : sources) out += "," + s;
    out += "\n";
    for (std::size_t i = 0; i < sources.size(); ++i) {
        out += sources[i];
        for (std::size_t j = 0; j < sources.size(); ++j) out += "," + fixed(normalized[i][j], 6);
        out += "\n";
    }
    return out;
}

OverlapMatrix pairwise_overlap(const std::vector<ConsensusRecord>& records, const std::vector<std::string>& sources,
                               const std::map<std::string, std::uint64_t>& totals, CountMode mode) {
    OverlapMatrix m;
    m.sources = sources;
    const std::size_t n = sources.size();
    m.shared.assign(n, std::vector<std::uint64_t>(n, 0));
    m.normalized.assign(n, std::vector<double>(n, 0.0));
    for (const auto& s : sources) {
        if (!totals.count(s)) throw DataError("source '" + s + "' has no totals");
    }

    std::vector<std::size_t> idx;
    for (const auto& r : records) {
        idx.clear();
        for (const auto& s : r.sources) idx.push_back(index_of(sources, s));
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        const std::uint64_t w = cluster_weight(r, mode);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                m.shared[idx[a]][idx[b]] += w;
                m.shared[idx[b]][idx[a]] += w;
            }
        }
        for (const auto& share : r.shares) m.shared[index_of(sources, share.source)][index_of(sources, share.source)] += source_value(share, mode);
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::uint64_t denom = std::min(totals.at(sources[i]), totals.at(sources[j]));
            if (denom == 0) continue;
            m.normalized[i][j] = std::min(1.0, static_cast<double>(m.shared[i][j]) / static_cast<double>(denom));
        }
    }
    return m;
}

std::uint64_t DepthHistogram::cross_source_units() const {
    std::uint64_t t = 0;
    for (const auto& b : bins) t += b.units;
    return t;
}

nlohmann::json DepthHistogram::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    std::uint64_t clusters = 0;
    for (const auto& b : bins) {
        arr.push_back({{"depth", b.depth}, {"clusters", b.clusters}, {"units", b.units}, {"percent", b.percent}});
        clusters += b.clusters;
    }
    return {
        {"depths", arr},
        {"cross_source_clusters", clusters},
        {"cross_source_units", cross_source_units()},
        {"single_source_clusters", single_source_clusters},
        {"single_source_units", single_source_units},
    };
}

DepthHistogram depth_histogram(const std::vector<ConsensusRecord>& records, std::size_t source_count, CountMode mode) {
    DepthHistogram h;
    for (std::size_t d = 2; d <= source_count; ++d) h.bins.push_back({d, 0, 0, 0.0});
    for (const auto& r : records) {
        const std::size_t depth = r.sources.size();
        const std::uint64_t w = cluster_weight(r, mode);
        if (depth <= 1) {
            ++h.single_source_clusters;
            h.single_source_units += w;
            continue;
        }
        if (depth > source_count) throw DataError("cluster " + r.id + " spans more sources than configured");
        auto& bin = h.bins[depth - 2];
        ++bin.clusters;
        bin.units += w;
    }
    const std::uint64_t total = h.cross_source_units();
    if (total > 0) {
        for (auto& b : h.bins) b.percent = 100.0 * static_cast<double>(b.units) / static_cast<double>(total);
    }
    return h;
}

nlohmann::json SurvivalTable::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"source", r.source}, {"before", r.before}, {"after", r.after}, {"survival", r.survival}});
    }
    return {{"sources", arr}};
}

SurvivalTable survival_rates(const std::vector<std::string>& sources, const std::map<std::string, std::uint64_t>& before,
                             const std::map<std::string, std::uint64_t>& after) {
    SurvivalTable t;
    for (const auto& s : sources) {
        const auto b = before.find(s);
        const auto a = after.find(s);
        if (b == before.end() || a == after.end()) throw DataError("source '" + s + "' missing from survival counts");
        if (a->second > b->second) {
            throw DataError("source '" + s + "' has more documents after deduplication than before");
        }
        SurvivalRow row{s, b->second, a->second, 0.0};
        if (b->second > 0) row.survival = static_cast<double>(a->second) / static_cast<double>(b->second);
        t.rows.push_back(row);
    }
    return t;
}

AnalysisResult analyze(const std::vector<ConsensusRecord>& records, const MinHashStats& stats, CountMode mode) {
    std::map<std::string, std::uint64_t> totals;
    std::map<std::string, std::uint64_t> before;
    std::map<std::string, std::uint64_t> after;
    for (const auto& name : stats.source_order) {
        const auto& s = stats.sources.at(name);
        totals[name] = mode == CountMode::documents ? s.input_docs : s.input_units;
        before[name] = s.input_docs;
        after[name] = s.output_docs;
    }
    AnalysisResult r;
    r.matrix = pairwise_overlap(records, stats.source_order, totals, mode);
    r.histogram = depth_histogram(records, stats.source_order.size(), mode);
    r.survival = survival_rates(stats.source_order, before, after);
    return r;
}

std::string render_analysis_markdown(const AnalysisResult& result, CountMode mode, std::string_view unit_label) {
    const std::string weight = mode == CountMode::documents ? "documents" : std::string(unit_label);
    std::string md = "# Cross-source redundancy\n\n";

    md += "## Survival after cross-source deduplication\n\n";
    md += "| Source | Before | After | Survival |\n|---|---:|---:|---:|\n";
    for (const auto& r : result.survival.rows) {
        md += "| " + r.source + " | " + std::to_string(r.before) + " | " + std::to_string(r.after) + " | " +
              fixed(100.0 * r.survival, 1) + "% |\n";
    }

    md += "\n## Duplicates by number of sources\n\n";
    md += "| Sources | Clusters | Duplicate " + weight + " | Share |\n|---:|---:|---:|---:|\n";
    for (const auto& b : result.histogram.bins) {
        md += "| " + std::to_string(b.depth) + " | " + std::to_string(b.clusters) + " | " + std::to_string(b.units) +
              " | " + fixed(b.percent, 1) + "% |\n";
    }
    md += "\nSingle-source clusters: " + std::to_string(result.histogram.single_source_clusters) + " (" +
          std::to_string(result.histogram.single_source_units) + " duplicate " + weight + ").\n";

    const auto& m = result.matrix;
    auto header = [&] {
        std::string h = "|  |";
        std::string rule = "|---|";
        for (const auto& s : m.sources) {
            h += " " + s + " |";
            rule += "---:|";
        }
        return h + "\n" + rule + "\n";
    };
    md += "\n## Pairwise overlap (" + weight + ")\n\n" + header();
    for (std::size_t i = 0; i < m.sources.size(); ++i) {
        md += "| " + m.sources[i] + " |";
        for (std::size_t j = 0; j < m.sources.size(); ++j) md += " " + std::to_string(m.shared[i][j]) + " |";
        md += "\n";
    }
    md += "\n## Pairwise overlap, normalized by the smaller source\n\n" + header();
    for (std::size_t i = 0; i < m.sources.size(); ++i) {
        md += "| " + m.sources[i] + " |";
        for (std::size_t j = 0; j < m.sources.size(); ++j) md += " " + fixed(100.0 * m.normalized[i][j], 1) + "% |";
        md += "\n";
    }
    return md;
}

AnalysisResult run_analysis(const AnalysisOptions& options) {
    const auto records = read_consensus(options.consensus_path);
    MinHashStats stats;
    try {
        stats = MinHashStats::from_json(nlohmann::json::parse(read_file(options.stats_path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("cannot parse " + options.stats_path + ": " + e.what());
    }
    AnalysisResult r = analyze(records, stats, options.mode);

    const fs::path out(options.output_dir);
    write_file_atomic((out / "overlap_raw.csv").string(), r.matrix.raw_csv());
    write_file_atomic((out / "overlap_normalized.csv").string(), r.matrix.normalized_csv());
    nlohmann::json hist = r.histogram.to_json();
    hist["mode"] = count_mode_name(options.mode);
    hist["unit"] = options.mode == CountMode::documents ? std::string("documents") : stats.unit_label;
    write_file_atomic((out / "depth_histogram.json").string(), hist.dump(2) + "\n");
    write_file_atomic((out / "survival.json").string(), r.survival.to_json().dump(2) + "\n");
    write_file_atomic((out / "analysis.md").string(), render_analysis_markdown(r, options.mode, stats.unit_label));
    return r;
}

} // namespace curate
