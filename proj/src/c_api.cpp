#include "curate/curate.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include <json.hpp>

#include "corpus_io.hpp"
#include "error.hpp"
#include "minhash.hpp"
#include "overlap.hpp"
#include "pipeline.hpp"
#include "quality_filter.hpp"
#include "sentence_dedup.hpp"
#include "span_store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

struct curate_filter_config {
    curate::FilterConfig cfg;
};

struct curate_minhasher {
    curate::MinHasher hasher;
};

struct curate_span_store {
    curate::SpanCountStore store;
};

struct curate_pipeline {
    curate::PipelineConfig config;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
curate_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return CURATE_OK;
    } catch (const curate::Error& e) {
        g_last_error = e.what();
        return static_cast<curate_status>(e.kind());
    } catch (const json::exception& e) {
        g_last_error = e.what();
        return CURATE_ERR_USAGE;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CURATE_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CURATE_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return CURATE_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) throw curate::UsageError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

json parse_options(const char* text) {
    if (text == nullptr || *text == '\0') return json::object();
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw curate::UsageError("options must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw curate::UsageError(std::string("cannot parse options: ") + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw curate::UsageError("unknown option '" + key + "'");
        }
    }
}

std::vector<std::string> as_list(const json& j) {
    if (j.is_string()) return {j.get<std::string>()};
    return j.get<std::vector<std::string>>();
}

// A stage directory contributes the shards listed in its manifest; anything
// else is a glob.
std::vector<std::string> expand_inputs(const json& j) {
    std::vector<std::string> out;
    for (const auto& p : as_list(j)) {
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            const auto manifest = fs::path(p) / "manifest.json";
            if (fs::exists(manifest, ec)) {
                for (const auto& s : curate::ShardManifest::load(manifest.string()).shard_paths) {
                    out.push_back((fs::path(p) / s).string());
                }
            } else {
                for (auto& s : curate::expand_glob((fs::path(p) / "*.jsonl*").string())) out.push_back(std::move(s));
            }
        } else {
            for (auto& s : curate::expand_glob(p)) out.push_back(std::move(s));
        }
    }
    if (out.empty()) throw curate::UsageError("no input shards given");
    return out;
}

curate::MinHashParams minhash_params(const json& j, curate::MinHashParams p = {}) {
    p.shingle_len = j.value("shingle", p.shingle_len);
    p.bands = j.value("bands", p.bands);
    p.rows_per_band = j.value("rows", p.rows_per_band);
    p.seed = j.value("seed", p.seed);
    p.bucket_cap = j.value("bucket_cap", p.bucket_cap);
    const auto unit = j.value("shingle_unit", std::string("chars"));
    if (unit == "chars") {
        p.unit = curate::ShingleUnit::chars;
    } else if (unit == "words") {
        p.unit = curate::ShingleUnit::words;
    } else {
        throw curate::UsageError("shingle_unit must be chars or words");
    }
    p.validate();
    return p;
}

void emit(char** out, const json& j) {
    if (out != nullptr) *out = dup_string(j.dump(2));
}

} // namespace

extern "C" {

const char* curate_version(void) { return CURATE_VERSION_STRING; }

const char* curate_last_error(void) { return g_last_error.c_str(); }

void curate_string_free(char* s) { std::free(s); }

curate_status curate_filter_config_new(curate_filter_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new curate_filter_config{};
    });
}

curate_status curate_filter_config_load(const char* path, curate_filter_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new curate_filter_config{curate::FilterConfig::load(path)};
    });
}

curate_status curate_filter_config_set(curate_filter_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        require(cfg, "cfg");
        require(key, "key");
        require(value, "value");
        curate::FilterConfig next = cfg->cfg;
        next.set(key, value);
        next.validate();
        cfg->cfg = std::move(next);
    });
}

curate_status curate_filter_config_merge_json(curate_filter_config* cfg, const char* text) {
    return guarded([&] {
        require(cfg, "cfg");
        curate::FilterConfig next = cfg->cfg;
        next.merge_json(parse_options(text));
        next.validate();
        cfg->cfg = std::move(next);
    });
}

curate_status curate_filter_config_to_json(const curate_filter_config* cfg, char** out_json) {
    return guarded([&] {
        require(cfg, "cfg");
        require(out_json, "out_json");
        *out_json = dup_string(cfg->cfg.to_json().dump(2));
    });
}

void curate_filter_config_free(curate_filter_config* cfg) { delete cfg; }

curate_status curate_filter_document(const curate_filter_config* cfg, const char* text, size_t len, int* kept,
                                     const char** reason, char** scrubbed_text) {
    return guarded([&] {
        require(cfg, "cfg");
        require(kept, "kept");
        if (len > 0) require(text, "text");
        const curate::Document doc("", std::string(text == nullptr ? "" : text, len), "");
        const auto scrub = curate::filter_lines(doc, cfg->cfg);
        const auto verdict = curate::evaluate_document(scrub.doc, cfg->cfg);
        char* scrubbed = scrubbed_text != nullptr ? dup_string(scrub.doc.text()) : nullptr;
        *kept = verdict.kept ? 1 : 0;
        if (reason != nullptr) *reason = verdict.kept ? nullptr : curate::reason_name(*verdict.reason).data();
        if (scrubbed_text != nullptr) *scrubbed_text = scrubbed;
    });
}

curate_status curate_minhasher_new(const char* params_json, curate_minhasher** out) {
    return guarded([&] {
        require(out, "out");
        const json j = parse_options(params_json);
        check_keys(j, {"shingle", "bands", "rows", "seed", "shingle_unit", "bucket_cap"});
        *out = new curate_minhasher{curate::MinHasher(minhash_params(j))};
    });
}

size_t curate_minhasher_width(const curate_minhasher* h) { return h == nullptr ? 0 : h->hasher.width(); }

curate_status curate_minhasher_sign(const curate_minhasher* h, const char* text, size_t len, uint64_t* out,
                                    size_t out_len) {
    return guarded([&] {
        require(h, "hasher");
        require(out, "out");
        if (len > 0) require(text, "text");
        if (out_len < h->hasher.width()) throw curate::UsageError("output buffer is smaller than the signature");
        h->hasher.sign_text(std::string_view(text == nullptr ? "" : text, len), std::span(out, h->hasher.width()));
    });
}

void curate_minhasher_free(curate_minhasher* h) { delete h; }

curate_status curate_span_store_open(const char* path, curate_span_store** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new curate_span_store{curate::SpanCountStore::open(path)};
    });
}

uint64_t curate_span_store_count(const curate_span_store* store, const uint8_t hash[16]) {
    if (store == nullptr || hash == nullptr) return 0;
    curate::SpanHash h;
    std::memcpy(h.data(), hash, 16);
    return store->store.count(h);
}

size_t curate_span_store_size(const curate_span_store* store) { return store == nullptr ? 0 : store->store.size(); }

curate_status curate_span_store_merge(const char* const* inputs, size_t count, const char* output) {
    return guarded([&] {
        require(output, "output");
        if (count > 0) require(inputs, "inputs");
        std::vector<std::string> paths;
        for (size_t i = 0; i < count; ++i) {
            require(inputs[i], "input path");
            paths.emplace_back(inputs[i]);
        }
        curate::merge_span_stores(paths, output);
    });
}

void curate_span_store_close(curate_span_store* store) { delete store; }

curate_status curate_pipeline_load(const char* config_path, curate_pipeline** out) {
    return guarded([&] {
        require(config_path, "config_path");
        require(out, "out");
        *out = new curate_pipeline{curate::PipelineConfig::load(config_path)};
    });
}

curate_status curate_pipeline_from_json(const char* text, const char* base_dir, curate_pipeline** out) {
    return guarded([&] {
        require(text, "json");
        require(out, "out");
        *out = new curate_pipeline{
            curate::PipelineConfig::from_json(parse_options(text), base_dir == nullptr ? "." : base_dir)};
    });
}

curate_status curate_pipeline_set_seed(curate_pipeline* p, uint64_t seed) {
    return guarded([&] {
        require(p, "pipeline");
        p->config.minhash.seed = seed;
    });
}

curate_status curate_pipeline_set_threads(curate_pipeline* p, unsigned threads) {
    return guarded([&] {
        require(p, "pipeline");
        p->config.threads = threads;
    });
}

curate_status curate_pipeline_run(curate_pipeline* p, const char* stages, char** report_json) {
    return guarded([&] {
        require(p, "pipeline");
        const auto report = curate::run_pipeline(p->config, curate::parse_stages(stages == nullptr ? "" : stages));
        emit(report_json, report.to_json());
    });
}

void curate_pipeline_free(curate_pipeline* p) { delete p; }

curate_status curate_run_filter(const char* options_json, char** result_json) {
    return guarded([&] {
        const json j = parse_options(options_json);
        check_keys(j, {"inputs", "output", "config", "set", "unit", "threads", "compress"});
        curate::FilterStageOptions o;
        for (const auto& in : j.at("inputs")) {
            std::string pattern = in.at("pattern").get<std::string>();
            std::error_code ec;
            if (fs::is_directory(pattern, ec)) pattern = (fs::path(pattern) / "*.jsonl*").string();
            o.inputs.push_back({in.at("name").get<std::string>(), pattern});
        }
        o.output_dir = j.at("output").get<std::string>();
        if (j.contains("config")) {
            const auto& c = j.at("config");
            if (c.is_string()) {
                o.config = curate::FilterConfig::load(c.get<std::string>());
            } else {
                o.config.merge_json(c);
            }
        }
        if (j.contains("set")) {
            for (const auto& [key, value] : j.at("set").items()) o.config.set(key, value.get<std::string>());
        }
        o.unit = curate::CountUnit::parse(j.value("unit", std::string("words")));
        o.threads = j.value("threads", 0u);
        o.compress = j.value("compress", false);
        emit(result_json, curate::run_filter_stage(o).stats.to_json());
    });
}

curate_status curate_run_minhash(const char* options_json, char** result_json) {
    return guarded([&] {
        const json j = parse_options(options_json);
        check_keys(j, {"inputs", "output", "priority", "shingle", "bands", "rows", "seed", "shingle_unit",
                       "bucket_cap", "unit", "threads", "compress"});
        curate::MinHashStageOptions o;
        o.inputs = expand_inputs(j.at("inputs"));
        o.output_dir = j.at("output").get<std::string>();
        o.params = minhash_params(j);
        if (!j.contains("priority")) throw curate::UsageError("minhash needs a source priority list");
        o.priority = as_list(j.at("priority"));
        o.unit = curate::CountUnit::parse(j.value("unit", std::string("words")));
        o.threads = j.value("threads", 0u);
        o.compress = j.value("compress", false);
        emit(result_json, curate::run_minhash_stage(o).stats.to_json());
    });
}

curate_status curate_run_sentdedup(const char* options_json, char** result_json) {
    return guarded([&] {
        const json j = parse_options(options_json);
        check_keys(j, {"inputs", "output", "store", "phase", "span", "min_sentence_words", "threshold",
                       "min_doc_words", "source", "sources", "unit", "threads", "compress"});
        curate::SentDedupStageOptions o;
        o.inputs = expand_inputs(j.at("inputs"));
        o.output_dir = j.at("output").get<std::string>();
        o.store_path = j.value("store", std::string());
        o.phase = curate::parse_span_phase(j.value("phase", std::string("both")));
        o.params.span_size = j.value("span", o.params.span_size);
        o.params.min_sentence_words = j.value("min_sentence_words", o.params.min_sentence_words);
        o.params.dup_threshold = j.value("threshold", o.params.dup_threshold);
        o.params.min_doc_words_after = j.value("min_doc_words", o.params.min_doc_words_after);
        o.source = j.value("source", std::string());
        if (j.contains("sources")) o.source_order = as_list(j.at("sources"));
        o.unit = curate::CountUnit::parse(j.value("unit", std::string("words")));
        o.threads = j.value("threads", 0u);
        o.compress = j.value("compress", false);
        const auto r = curate::run_sentdedup_stage(o);
        emit(result_json, r.stats.to_json());
    });
}

curate_status curate_run_analyze(const char* options_json, char** result_json) {
    return guarded([&] {
        const json j = parse_options(options_json);
        check_keys(j, {"consensus", "stats", "output", "mode"});
        curate::AnalysisOptions o;
        o.consensus_path = j.at("consensus").get<std::string>();
        o.stats_path = j.at("stats").get<std::string>();
        o.output_dir = j.at("output").get<std::string>();
        o.mode = curate::parse_count_mode(j.value("mode", std::string("documents")));
        const auto r = curate::run_analysis(o);
        emit(result_json, {{"histogram", r.histogram.to_json()}, {"survival", r.survival.to_json()}});
    });
}

} // extern "C"
