#include <curate/curate.h>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

using nlohmann::json;

namespace {

struct Failure {
    int code;
    std::string message;
};

void check(curate_status st) {
    if (st != CURATE_OK) throw Failure{static_cast<int>(st), curate_last_error()};
}

std::string take(char* s) {
    std::string out = s == nullptr ? "" : s;
    curate_string_free(s);
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string dashed(std::string key) {
    for (char& c : key) {
        if (c == '_') c = '-';
    }
    return key;
}

// Filter settings exposed as individual flags, taken from the library's own
// defaults so the two never drift apart.
std::vector<std::string> filter_keys() {
    curate_filter_config* cfg = nullptr;
    check(curate_filter_config_new(&cfg));
    char* text = nullptr;
    const auto st = curate_filter_config_to_json(cfg, &text);
    curate_filter_config_free(cfg);
    check(st);
    std::vector<std::string> keys;
    const json defaults = json::parse(take(text));
    for (const auto& [key, value] : defaults.items()) keys.push_back(key);
    return keys;
}

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quality filtering, near-duplicate removal and boilerplate stripping for JSON-lines corpora"};
    app.set_version_flag("--version", std::string(curate_version()));
    app.require_subcommand(0, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string stages;
    std::optional<unsigned> threads;
    app.add_option("--config", config_path, "Pipeline config (JSON)");
    app.add_option("--seed", seed, "Hash seed for every stage");
    app.add_option("--stages", stages, "Comma-separated subset of filter,minhash,sentdedup,analyze");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    // filter
    auto* filter = app.add_subcommand("filter", "Quality-filter raw shards");
    std::vector<std::string> f_inputs;
    std::string f_source;
    std::string f_output;
    std::string f_config;
    std::vector<std::string> f_sets;
    std::string f_unit = "words";
    unsigned f_threads = 0;
    bool f_compress = false;
    filter->add_option("--input", f_inputs, "GLOB, or NAME=GLOB to name the source")->required();
    filter->add_option("--source", f_source, "Source name for inputs given without NAME=");
    filter->add_option("--output", f_output, "Output directory")->required();
    filter->add_option("--config", f_config, "Filter config (JSON)");
    filter->add_option("--set", f_sets, "KEY=VALUE override");
    filter->add_option("--unit", f_unit, "Count unit: words or an integer record field");
    filter->add_option("--threads", f_threads);
    filter->add_flag("--compress", f_compress, "Write gzip shards");
    std::map<std::string, std::string> f_fields;
    std::vector<std::string> keys;
    try {
        keys = filter_keys();
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << "\n";
        return f.code;
    }
    for (const auto& key : keys) filter->add_option("--" + dashed(key), f_fields[key], "Override " + key);

    // minhash
    auto* minhash = app.add_subcommand("minhash", "Remove near-duplicate documents across sources");
    std::vector<std::string> m_inputs;
    std::string m_output;
    std::string m_priority;
    std::optional<std::uint64_t> m_seed;
    std::optional<std::size_t> m_bands, m_rows, m_shingle, m_cap;
    std::string m_shingle_unit = "chars";
    std::string m_unit = "words";
    unsigned m_threads = 0;
    bool m_compress = false;
    minhash->add_option("--input", m_inputs, "Shard glob or stage directory")->required();
    minhash->add_option("--output", m_output, "Output directory")->required();
    minhash->add_option("--priority", m_priority, "Sources, highest priority first (comma-separated)")->required();
    minhash->add_option("--seed", m_seed);
    minhash->add_option("--bands", m_bands);
    minhash->add_option("--rows", m_rows);
    minhash->add_option("--shingle", m_shingle);
    minhash->add_option("--shingle-unit", m_shingle_unit)->check(CLI::IsMember({"chars", "words"}));
    minhash->add_option("--bucket-cap", m_cap);
    minhash->add_option("--unit", m_unit);
    minhash->add_option("--threads", m_threads);
    minhash->add_flag("--compress", m_compress);

    // sentdedup
    auto* sent = app.add_subcommand("sentdedup", "Strip repeated sentence spans");
    std::vector<std::string> s_inputs;
    std::string s_output;
    std::string s_store;
    std::string s_phase = "both";
    std::string s_source;
    std::string s_sources;
    std::optional<std::size_t> s_span, s_min_sentence_words, s_min_doc_words;
    std::optional<std::uint64_t> s_threshold;
    std::string s_unit = "words";
    unsigned s_threads = 0;
    bool s_compress = false;
    sent->add_option("--input", s_inputs, "Shard glob or stage directory")->required();
    sent->add_option("--output", s_output, "Output directory")->required();
    sent->add_option("--store", s_store, "Span count store (default <output>/spans.store)");
    sent->add_option("--phase", s_phase)->check(CLI::IsMember({"sign", "filter", "both"}));
    sent->add_option("--span", s_span);
    sent->add_option("--min-sentence-words", s_min_sentence_words);
    sent->add_option("--threshold", s_threshold);
    sent->add_option("--min-doc-words", s_min_doc_words);
    sent->add_option("--source", s_source, "Source tag applied to every record");
    sent->add_option("--sources", s_sources, "Report order of sources (comma-separated)");
    sent->add_option("--unit", s_unit);
    sent->add_option("--threads", s_threads);
    sent->add_flag("--compress", s_compress);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Cross-source overlap analytics");
    std::string a_consensus;
    std::string a_stats;
    std::string a_output;
    std::string a_mode = "documents";
    analyze->add_option("--consensus", a_consensus, "consensus.jsonl from the minhash stage")->required();
    analyze->add_option("--stats", a_stats, "stats.json from the minhash stage")->required();
    analyze->add_option("--output", a_output, "Output directory")->required();
    analyze->add_option("--mode", a_mode)->check(CLI::IsMember({"documents", "units"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        char* out = nullptr;
        if (*filter) {
            json o;
            o["inputs"] = json::array();
            for (const auto& in : f_inputs) {
                const auto eq = in.find('=');
                if (eq != std::string::npos) {
                    o["inputs"].push_back({{"name", in.substr(0, eq)}, {"pattern", in.substr(eq + 1)}});
                } else if (!f_source.empty()) {
                    o["inputs"].push_back({{"name", f_source}, {"pattern", in}});
                } else {
                    throw Failure{1, "input '" + in + "' needs a source name (NAME=GLOB or --source)"};
                }
            }
            o["output"] = f_output;
            if (!f_config.empty()) o["config"] = f_config;
            json sets = json::object();
            for (const auto& s : f_sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw Failure{1, "--set expects KEY=VALUE, got '" + s + "'"};
                sets[s.substr(0, eq)] = s.substr(eq + 1);
            }
            for (const auto& [key, value] : f_fields) {
                if (filter->count("--" + dashed(key)) > 0) sets[key] = value;
            }
            o["set"] = sets;
            o["unit"] = f_unit;
            o["threads"] = f_threads;
            o["compress"] = f_compress;
            check(curate_run_filter(o.dump().c_str(), &out));
        } else if (*minhash) {
            json o;
            o["inputs"] = m_inputs;
            o["output"] = m_output;
            o["priority"] = split_csv(m_priority);
            put(o, "seed", m_seed.has_value() ? m_seed : seed);
            put(o, "bands", m_bands);
            put(o, "rows", m_rows);
            put(o, "shingle", m_shingle);
            put(o, "bucket_cap", m_cap);
            o["shingle_unit"] = m_shingle_unit;
            o["unit"] = m_unit;
            o["threads"] = m_threads;
            o["compress"] = m_compress;
            check(curate_run_minhash(o.dump().c_str(), &out));
        } else if (*sent) {
            json o;
            o["inputs"] = s_inputs;
            o["output"] = s_output;
            if (!s_store.empty()) o["store"] = s_store;
            o["phase"] = s_phase;
            put(o, "span", s_span);
            put(o, "min_sentence_words", s_min_sentence_words);
            put(o, "threshold", s_threshold);
            put(o, "min_doc_words", s_min_doc_words);
            if (!s_source.empty()) o["source"] = s_source;
            if (!s_sources.empty()) o["sources"] = split_csv(s_sources);
            o["unit"] = s_unit;
            o["threads"] = s_threads;
            o["compress"] = s_compress;
            check(curate_run_sentdedup(o.dump().c_str(), &out));
        } else if (*analyze) {
            json o = {{"consensus", a_consensus}, {"stats", a_stats}, {"output", a_output}, {"mode", a_mode}};
            check(curate_run_analyze(o.dump().c_str(), &out));
        } else {
            if (config_path.empty()) throw Failure{1, "--config is required when no subcommand is given"};
            curate_pipeline* p = nullptr;
            check(curate_pipeline_load(config_path.c_str(), &p));
            curate_status st = CURATE_OK;
            if (seed) st = curate_pipeline_set_seed(p, *seed);
            if (st == CURATE_OK && threads) st = curate_pipeline_set_threads(p, *threads);
            if (st == CURATE_OK) st = curate_pipeline_run(p, stages.c_str(), &out);
            curate_pipeline_free(p);
            check(st);
        }
        std::cout << take(out) << "\n";
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << "\n";
        return f.code;
    }
    return 0;
}
