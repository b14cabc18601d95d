#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>

#include "corpus_io.hpp"
#include "error.hpp"

namespace fs = std::filesystem;

namespace curate {

namespace {

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base) / p).lexically_normal().string();
}

void check_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw UsageError(std::string(where) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw UsageError("unknown key '" + key + "' in " + std::string(where));
        }
    }
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

double reduction(std::uint64_t in, std::uint64_t out) noexcept {
    if (in == 0) return 0.0;
    const double r = 100.0 * (static_cast<double>(in) - static_cast<double>(out)) / static_cast<double>(in);
    return std::round(r * 10.0) / 10.0;
}

nlohmann::json counts_json(const StageCounts& c) {
    return {
        {"input_docs", c.input_docs},
        {"output_docs", c.output_docs},
        {"doc_reduction_pct", c.doc_reduction_pct()},
        {"input_units", c.input_units},
        {"output_units", c.output_units},
        {"unit_reduction_pct", c.unit_reduction_pct()},
    };
}

std::vector<std::string> stage_inputs(const std::string& dir) {
    const auto manifest = ShardManifest::load((fs::path(dir) / "manifest.json").string());
    std::vector<std::string> paths;
    for (const auto& p : manifest.shard_paths) paths.push_back((fs::path(dir) / p).string());
    return paths;
}

void discard_stage_output(const std::string& dir) {
    std::error_code ec;
    if (!fs::exists(dir, ec)) return;
    try {
        clear_stage_shards(dir);
    } catch (const Error&) {
    }
    for (const char* f : {"stats.json", "manifest.json", "consensus.jsonl"}) fs::remove(fs::path(dir) / f, ec);
    fs::remove_all(fs::path(dir) / "signatures", ec);
}

template <typename Fn>
void run_stage(Stage stage, const std::string& dir, Fn&& fn) {
    const std::string prefix = std::string(stage_name(stage)) + " stage: ";
    try {
        fn();
    } catch (const Error& e) {
        if (stage != Stage::analyze) discard_stage_output(dir);
        throw_error(e.kind(), prefix + e.what());
    } catch (const nlohmann::json::exception& e) {
        if (stage != Stage::analyze) discard_stage_output(dir);
        throw DataError(prefix + e.what());
    }
}

} // namespace

void PipelineConfig::validate() const {
    if (output_root.empty()) throw UsageError("config needs an output directory");
    if (sources.empty()) throw UsageError("config needs at least one source");
    std::set<std::string> names;
    for (const auto& s : sources) {
        if (s.name.empty()) throw UsageError("source name must not be empty");
        if (s.path.empty()) throw UsageError("source '" + s.name + "' needs a path");
        if (!names.insert(s.name).second) throw UsageError("duplicate source name: " + s.name);
        if (s.priority < 0) throw UsageError("source '" + s.name + "' has a negative priority");
    }
    priority_order();
    filter.validate();
    minhash.validate();
    span.validate();
}

std::vector<std::string> PipelineConfig::priority_order() const {
    std::vector<std::pair<int, std::size_t>> keyed;
    std::set<int> seen;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const int p = sources[i].priority > 0 ? sources[i].priority : static_cast<int>(i) + 1;
        if (!seen.insert(p).second) {
            throw UsageError("priority " + std::to_string(p) + " is used by more than one source");
        }
        keyed.emplace_back(p, i);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::string> out;
    for (const auto& [p, i] : keyed) out.push_back(sources[i].name);
    return out;
}

std::vector<std::string> PipelineConfig::source_names() const {
    std::vector<std::string> out;
    for (const auto& s : sources) out.push_back(s.name);
    return out;
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json src = nlohmann::json::array();
    for (const auto& s : sources) src.push_back({{"name", s.name}, {"path", s.path}, {"priority", s.priority}});
    return {
        {"output", output_root},
        {"seed", minhash.seed},
        {"threads", threads},
        {"unit", unit.label()},
        {"compress", compress},
        {"sources", src},
        {"filter", filter.to_json()},
        {"minhash",
         {{"shingle", minhash.shingle_len},
          {"bands", minhash.bands},
          {"rows", minhash.rows_per_band},
          {"shingle_unit", minhash.unit == ShingleUnit::chars ? "chars" : "words"},
          {"bucket_cap", minhash.bucket_cap}}},
        {"sentdedup", span.to_json()},
        {"analysis", {{"mode", count_mode_name(analysis_mode)}}},
    };
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
    PipelineConfig c;
    try {
        check_keys(j, "config", {"output", "seed", "threads", "unit", "compress", "sources", "filter", "minhash",
                                 "sentdedup", "analysis"});
        c.output_root = resolve(base_dir, j.value("output", std::string("output")));
        c.minhash.seed = j.value("seed", std::uint64_t{0});
        c.threads = j.value("threads", 0u);
        c.unit = CountUnit::parse(j.value("unit", std::string("words")));
        c.compress = j.value("compress", false);
        for (const auto& s : j.at("sources")) {
            check_keys(s, "source entry", {"name", "path", "priority"});
            c.sources.push_back({s.at("name").get<std::string>(), resolve(base_dir, s.at("path").get<std::string>()),
                                 s.value("priority", 0)});
        }
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            if (f.is_string()) {
                c.filter = FilterConfig::load(resolve(base_dir, f.get<std::string>()));
            } else {
                c.filter.merge_json(f);
            }
        }
        if (j.contains("minhash")) {
            const auto& m = j.at("minhash");
            check_keys(m, "minhash", {"shingle", "bands", "rows", "shingle_unit", "bucket_cap"});
            c.minhash.shingle_len = m.value("shingle", c.minhash.shingle_len);
            c.minhash.bands = m.value("bands", c.minhash.bands);
            c.minhash.rows_per_band = m.value("rows", c.minhash.rows_per_band);
            c.minhash.bucket_cap = m.value("bucket_cap", c.minhash.bucket_cap);
            const auto unit = m.value("shingle_unit", std::string("chars"));
            if (unit == "chars") {
                c.minhash.unit = ShingleUnit::chars;
            } else if (unit == "words") {
                c.minhash.unit = ShingleUnit::words;
            } else {
                throw UsageError("shingle_unit must be chars or words");
            }
        }
        if (j.contains("sentdedup")) {
            const auto& s = j.at("sentdedup");
            check_keys(s, "sentdedup", {"span", "min_sentence_words", "threshold", "min_doc_words"});
            c.span.span_size = s.value("span", c.span.span_size);
            c.span.min_sentence_words = s.value("min_sentence_words", c.span.min_sentence_words);
            c.span.dup_threshold = s.value("threshold", c.span.dup_threshold);
            c.span.min_doc_words_after = s.value("min_doc_words", c.span.min_doc_words_after);
        }
        if (j.contains("analysis")) {
            check_keys(j.at("analysis"), "analysis", {"mode"});
            c.analysis_mode = parse_count_mode(j.at("analysis").value("mode", std::string("documents")));
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("invalid pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const IoError& e) {
        throw UsageError(std::string("cannot read config: ") + e.what());
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("cannot parse config " + path + ": " + e.what());
    }
    auto base = fs::path(path).parent_path().string();
    return from_json(j, base.empty() ? "." : base);
}

std::string_view stage_name(Stage s) noexcept {
    switch (s) {
    case Stage::filter: return "filter";
    case Stage::minhash: return "minhash";
    case Stage::sentdedup: return "sentdedup";
    case Stage::analyze: return "analyze";
    }
    return "?";
}

std::vector<Stage> parse_stages(std::string_view csv) {
    constexpr Stage all[] = {Stage::filter, Stage::minhash, Stage::sentdedup, Stage::analyze};
    if (csv.empty()) return {std::begin(all), std::end(all)};
    std::set<Stage> chosen;
    while (!csv.empty()) {
        const auto comma = csv.find(',');
        const auto item = csv.substr(0, comma);
        bool found = false;
        for (Stage s : all) {
            if (stage_name(s) == item) {
                chosen.insert(s);
                found = true;
            }
        }
        if (!found) throw UsageError("unknown stage '" + std::string(item) + "'");
        if (comma == std::string_view::npos) break;
        csv.remove_prefix(comma + 1);
    }
    return {chosen.begin(), chosen.end()};
}

double StageCounts::doc_reduction_pct() const noexcept { return reduction(input_docs, output_docs); }
double StageCounts::unit_reduction_pct() const noexcept { return reduction(input_units, output_units); }

StageCounts& StageCounts::operator+=(const StageCounts& o) noexcept {
    input_docs += o.input_docs;
    output_docs += o.output_docs;
    input_units += o.input_units;
    output_units += o.output_units;
    return *this;
}

StageCounts StageSummary::total(const std::vector<std::string>& order) const {
    StageCounts t;
    for (const auto& name : order) {
        if (auto it = sources.find(name); it != sources.end()) t += it->second;
    }
    return t;
}

nlohmann::json StageReport::to_json() const {
    nlohmann::json stages_json = nlohmann::json::array();
    for (const auto& st : stages) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& name : sources) {
            auto row = counts_json(st.sources.count(name) ? st.sources.at(name) : StageCounts{});
            row["source"] = name;
            rows.push_back(std::move(row));
        }
        stages_json.push_back({{"stage", st.stage}, {"sources", rows}, {"total", counts_json(st.total(sources))}});
    }
    return {{"unit", unit_label}, {"sources", sources}, {"stages", stages_json}};
}

std::string StageReport::to_csv() const {
    std::string out = "stage,source,input_docs,output_docs,doc_reduction_pct,input_units,output_units,unit_reduction_pct\n";
    auto row = [&](const std::string& stage, const std::string& source, const StageCounts& c) {
        out += stage + "," + source + "," + std::to_string(c.input_docs) + "," + std::to_string(c.output_docs) + "," +
               pct(c.doc_reduction_pct()) + "," + std::to_string(c.input_units) + "," +
               std::to_string(c.output_units) + "," + pct(c.unit_reduction_pct()) + "\n";
    };
    for (const auto& st : stages) {
        for (const auto& name : sources) row(st.stage, name, st.sources.count(name) ? st.sources.at(name) : StageCounts{});
        row(st.stage, "total", st.total(sources));
    }
    return out;
}

std::string StageReport::to_markdown() const {
    std::string md = "# Pipeline report\n\nUnits: " + unit_label + "\n";
    if (stages.empty()) return md + "\nNo stage output found.\n";

    md += "\n## Stage summary\n\n";
    md += "| Stage | Input docs | Output docs | Doc reduction | Input " + unit_label + " | Output " + unit_label +
          " | Reduction |\n|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& st : stages) {
        const auto t = st.total(sources);
        md += "| " + st.stage + " | " + std::to_string(t.input_docs) + " | " + std::to_string(t.output_docs) + " | " +
              pct(t.doc_reduction_pct()) + "% | " + std::to_string(t.input_units) + " | " +
              std::to_string(t.output_units) + " | " + pct(t.unit_reduction_pct()) + "% |\n";
    }

    auto per_source = [&](const std::string& title, bool docs) {
        md += "\n## " + title + "\n\n| Source | Input |";
        std::string rule = "|---|---:|";
        for (const auto& st : stages) {
            md += " After " + st.stage + " |";
            rule += "---:|";
        }
        md += " Retained |\n" + rule + "---:|\n";
        auto line = [&](const std::string& label, auto&& get) {
            const StageCounts first = get(stages.front());
            const std::uint64_t in = docs ? first.input_docs : first.input_units;
            md += "| " + label + " | " + std::to_string(in) + " |";
            std::uint64_t last = in;
            for (const auto& st : stages) {
                const StageCounts c = get(st);
                last = docs ? c.output_docs : c.output_units;
                md += " " + std::to_string(last) + " |";
            }
            const double kept = in == 0 ? 0.0 : 100.0 * static_cast<double>(last) / static_cast<double>(in);
            md += " " + pct(kept) + "% |\n";
        };
        for (const auto& name : sources) {
            line(name, [&](const StageSummary& st) {
                return st.sources.count(name) ? st.sources.at(name) : StageCounts{};
            });
        }
        line("Total", [&](const StageSummary& st) { return st.total(sources); });
    };
    per_source("Documents per source", true);
    per_source(unit_label + " per source", false);
    return md;
}

PipelineLayout::PipelineLayout(const std::string& root)
    : filter_dir((fs::path(root) / "filter").string()),
      minhash_dir((fs::path(root) / "minhash").string()),
      sentdedup_dir((fs::path(root) / "sentdedup").string()),
      report_dir((fs::path(root) / "report").string()) {}

StageReport collect_stage_report(const PipelineConfig& config) {
    const PipelineLayout layout(config.output_root);
    StageReport report;
    report.unit_label = config.unit.label();
    report.sources = config.source_names();

    auto load = [](const std::string& dir) -> std::optional<nlohmann::json> {
        const auto path = fs::path(dir) / "stats.json";
        std::error_code ec;
        if (!fs::exists(path, ec)) return std::nullopt;
        try {
            return nlohmann::json::parse(read_file(path.string()));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("cannot parse " + path.string() + ": " + e.what());
        }
    };

    if (auto j = load(layout.filter_dir)) {
        const auto st = FilterStats::from_json(*j);
        StageSummary s{"filter", {}};
        for (const auto& [name, v] : st.sources) s.sources[name] = {v.input_docs, v.output_docs, v.input_units, v.output_units};
        report.stages.push_back(std::move(s));
    }
    if (auto j = load(layout.minhash_dir)) {
        const auto st = MinHashStats::from_json(*j);
        StageSummary s{"minhash", {}};
        for (const auto& [name, v] : st.sources) s.sources[name] = {v.input_docs, v.output_docs, v.input_units, v.output_units};
        report.stages.push_back(std::move(s));
    }
    if (auto j = load(layout.sentdedup_dir)) {
        const auto st = SentDedupStats::from_json(*j);
        StageSummary s{"sentdedup", {}};
        for (const auto& [name, v] : st.sources) s.sources[name] = {v.input_docs, v.output_docs, v.input_units, v.output_units};
        report.stages.push_back(std::move(s));
    }
    return report;
}

StageReport run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages) {
    config.validate();
    const PipelineLayout layout(config.output_root);
    for (Stage stage : stages) {
        switch (stage) {
        case Stage::filter:
            run_stage(stage, layout.filter_dir, [&] {
                FilterStageOptions o;
                for (const auto& s : config.sources) o.inputs.push_back({s.name, s.path});
                o.output_dir = layout.filter_dir;
                o.config = config.filter;
                o.unit = config.unit;
                o.threads = config.threads;
                o.compress = config.compress;
                run_filter_stage(o);
            });
            break;
        case Stage::minhash:
            run_stage(stage, layout.minhash_dir, [&] {
                MinHashStageOptions o;
                o.inputs = stage_inputs(layout.filter_dir);
                o.output_dir = layout.minhash_dir;
                o.params = config.minhash;
                o.priority = config.priority_order();
                o.unit = config.unit;
                o.threads = config.threads;
                o.compress = config.compress;
                run_minhash_stage(o);
            });
            break;
        case Stage::sentdedup:
            run_stage(stage, layout.sentdedup_dir, [&] {
                SentDedupStageOptions o;
                o.inputs = stage_inputs(layout.minhash_dir);
                o.output_dir = layout.sentdedup_dir;
                o.params = config.span;
                o.source_order = config.source_names();
                o.unit = config.unit;
                o.threads = config.threads;
                o.compress = config.compress;
                run_sentdedup_stage(o);
            });
            break;
        case Stage::analyze:
            run_stage(stage, layout.report_dir, [&] {
                AnalysisOptions o;
                o.consensus_path = (fs::path(layout.minhash_dir) / "consensus.jsonl").string();
                o.stats_path = (fs::path(layout.minhash_dir) / "stats.json").string();
                o.output_dir = layout.report_dir;
                o.mode = config.analysis_mode;
                run_analysis(o);
            });
            break;
        }
    }

    StageReport report = collect_stage_report(config);
    const fs::path dir(layout.report_dir);
    write_file_atomic((dir / "stage_report.json").string(), report.to_json().dump(2) + "\n");
    write_file_atomic((dir / "stage_report.csv").string(), report.to_csv());
    write_file_atomic((dir / "stage_report.md").string(), report.to_markdown());
    return report;
}

} // namespace curate
