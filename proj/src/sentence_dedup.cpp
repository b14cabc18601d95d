#include "sentence_dedup.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "error.hpp"
#include "parallel.hpp"
#include "quality_filter.hpp"
#include "utf8.hpp"

namespace fs = std::filesystem;

namespace curate {

namespace {

bool is_delimiter(char32_t c) noexcept {
    return c == U'.' || c == U'!' || c == U'?' || c == U'؟';
}

} // namespace

void SpanParams::validate() const {
    if (span_size == 0) throw UsageError("span size must be at least 1");
    if (min_sentence_words == 0) throw UsageError("minimum sentence words must be positive");
    if (dup_threshold == 0) throw UsageError("duplicate threshold must be positive");
    if (min_doc_words_after == 0) throw UsageError("minimum document words must be positive");
}

nlohmann::json SpanParams::to_json() const {
    return {
        {"span", span_size},
        {"min_sentence_words", min_sentence_words},
        {"threshold", dup_threshold},
        {"min_doc_words", min_doc_words_after},
    };
}

std::vector<Sentence> split_sentences(std::string_view text) {
    std::vector<Sentence> out;
    std::size_t line = 0;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        const auto s = text::trim(text.substr(start, end - start));
        if (!s.empty()) out.push_back({s, line, text::count_words(s)});
    };
    for (std::size_t pos = 0; pos < text.size();) {
        const std::size_t at = pos;
        const char32_t c = text::next_scalar(text, pos);
        if (c == U'\n') {
            emit(at);
            ++line;
            start = pos;
        } else if (is_delimiter(c)) {
            std::size_t end = pos;
            while (end < text.size()) {
                std::size_t p = end;
                if (!is_delimiter(text::next_scalar(text, p))) break;
                end = p;
            }
            emit(end);
            pos = start = end;
        }
    }
    emit(text.size());
    return out;
}

std::string span_key(const std::vector<std::string_view>& sentences) {
    std::string key;
    for (const auto s : sentences) {
        if (!key.empty()) key.push_back(' ');
        key += text::collapse_whitespace(s);
    }
    return key;
}

std::vector<SpanSignature> span_signatures(const std::vector<Sentence>& sentences, const SpanParams& params) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (sentences[i].words >= params.min_sentence_words) eligible.push_back(i);
    }
    std::vector<SpanSignature> out;
    if (eligible.size() < params.span_size) return out;
    out.reserve(eligible.size() - params.span_size + 1);
    std::vector<std::string_view> window(params.span_size);
    for (std::size_t w = 0; w + params.span_size <= eligible.size(); ++w) {
        for (std::size_t k = 0; k < params.span_size; ++k) window[k] = sentences[eligible[w + k]].text;
        out.push_back({md5(span_key(window)), eligible[w], eligible[w + params.span_size - 1]});
    }
    return out;
}

void count_spans(std::string_view text, const SpanParams& params, SpanCountBuilder& into) {
    for (const auto& sig : span_signatures(split_sentences(text), params)) into.add(sig.hash);
}

SpanFilterResult apply_span_filter(std::string_view text, const SpanCountLookup& counts, const SpanParams& params) {
    SpanFilterResult result;
    const auto sentences = split_sentences(text);
    const auto spans = span_signatures(sentences, params);

    std::vector<std::uint8_t> drop(sentences.size(), 0);
    for (const auto& sig : spans) {
        if (counts.count(sig.hash) < params.dup_threshold) continue;
        for (std::size_t i = sig.first; i <= sig.last; ++i) {
            if (sentences[i].words >= params.min_sentence_words) drop[i] = 1;
        }
    }
    for (auto d : drop) result.removed_sentences += d;
    if (result.removed_sentences == 0) {
        result.text = std::string(text);
        return result;
    }

    result.modified = true;
    std::vector<std::uint8_t> touched_line;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (!drop[i]) continue;
        if (sentences[i].line >= touched_line.size()) touched_line.resize(sentences[i].line + 1, 0);
        touched_line[sentences[i].line] = 1;
    }

    std::string out;
    bool first = true;
    std::size_t next = 0;
    std::size_t line = 0;
    for (std::size_t start = 0;; ++line) {
        std::size_t end = text.find('\n', start);
        const bool last = end == std::string_view::npos;
        if (last) end = text.size();
        if (line < touched_line.size() && touched_line[line]) {
            std::string rebuilt;
            for (; next < sentences.size() && sentences[next].line == line; ++next) {
                if (drop[next]) continue;
                if (!rebuilt.empty()) rebuilt.push_back(' ');
                rebuilt.append(sentences[next].text);
            }
            if (!rebuilt.empty()) {
                if (!first) out.push_back('\n');
                out += rebuilt;
                first = false;
            }
        } else {
            while (next < sentences.size() && sentences[next].line == line) ++next;
            if (!first) out.push_back('\n');
            out.append(text.substr(start, end - start));
            first = false;
        }
        if (last) break;
        start = end + 1;
    }

    result.text = std::move(out);
    result.discard = text::count_words(result.text) < params.min_doc_words_after;
    return result;
}

std::uint64_t build_count_store(const std::vector<std::string>& shards, const SpanParams& params,
                                const std::string& store_path, unsigned threads, const ReadOptions& ro) {
    params.validate();
    const fs::path parts_dir = store_path + ".parts";
    std::error_code ec;
    fs::remove_all(parts_dir, ec);
    fs::create_directories(parts_dir, ec);
    if (ec) throw IoError("cannot create " + parts_dir.string() + ": " + ec.message());

    std::vector<std::string> parts(shards.size());
    parallel_for(shards.size(), threads, [&](std::size_t s) {
        SpanCountBuilder builder;
        read_shard(shards[s], s, ro, [&](Document&& doc) { count_spans(doc.text(), params, builder); });
        char name[32];
        std::snprintf(name, sizeof name, "part-%05zu", s);
        parts[s] = (parts_dir / name).string();
        builder.write(parts[s]);
    });
    merge_span_stores(parts, store_path);
    fs::remove_all(parts_dir, ec);
    return SpanCountStore::open(store_path).size();
}

SourceSpanStats SentDedupStats::total() const {
    SourceSpanStats t;
    for (const auto& [name, s] : sources) {
        t.input_docs += s.input_docs;
        t.output_docs += s.output_docs;
        t.input_units += s.input_units;
        t.output_units += s.output_units;
        t.modified_docs += s.modified_docs;
        t.discarded_docs += s.discarded_docs;
        t.removed_sentences += s.removed_sentences;
    }
    return t;
}

nlohmann::json SentDedupStats::to_json() const {
    nlohmann::json src = nlohmann::json::array();
    for (const auto& name : source_order) {
        const auto& s = sources.at(name);
        src.push_back({
            {"name", name},
            {"input_docs", s.input_docs},
            {"output_docs", s.output_docs},
            {"input_units", s.input_units},
            {"output_units", s.output_units},
            {"modified_docs", s.modified_docs},
            {"discarded_docs", s.discarded_docs},
            {"removed_sentences", s.removed_sentences},
        });
    }
    const auto t = total();
    return {
        {"stage", "sentdedup"},
        {"unit", unit_label},
        {"sources", src},
        {"distinct_spans", distinct_spans},
        {"removed_sentences", t.removed_sentences},
        {"modified_docs", t.modified_docs},
        {"discarded_docs", t.discarded_docs},
        {"malformed", malformed},
    };
}

SentDedupStats SentDedupStats::from_json(const nlohmann::json& j) {
    try {
        SentDedupStats st;
        st.unit_label = j.at("unit").get<std::string>();
        for (const auto& e : j.at("sources")) {
            const auto name = e.at("name").get<std::string>();
            st.source_order.push_back(name);
            auto& s = st.sources[name];
            s.input_docs = e.at("input_docs").get<std::uint64_t>();
            s.output_docs = e.at("output_docs").get<std::uint64_t>();
            s.input_units = e.at("input_units").get<std::uint64_t>();
            s.output_units = e.at("output_units").get<std::uint64_t>();
            s.modified_docs = e.value("modified_docs", std::uint64_t{0});
            s.discarded_docs = e.value("discarded_docs", std::uint64_t{0});
            s.removed_sentences = e.value("removed_sentences", std::uint64_t{0});
        }
        st.distinct_spans = j.value("distinct_spans", std::uint64_t{0});
        st.malformed = j.value("malformed", std::uint64_t{0});
        return st;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid sentence dedup stats: ") + e.what());
    }
}

SpanPhase parse_span_phase(std::string_view s) {
    if (s == "sign") return SpanPhase::sign;
    if (s == "filter") return SpanPhase::filter;
    if (s == "both" || s.empty()) return SpanPhase::both;
    throw UsageError("unknown phase '" + std::string(s) + "' (expected sign, filter or both)");
}

SentDedupStageResult run_sentdedup_stage(const SentDedupStageOptions& options) {
    options.params.validate();
    const std::string store = options.store_path.empty()
                                  ? (fs::path(options.output_dir) / "spans.store").string()
                                  : options.store_path;
    SentDedupStageResult result;
    auto& st = result.stats;
    st.unit_label = options.unit.label();
    ReadOptions ro;
    ro.source = options.source;
    ro.required_field = options.unit.field;

    if (options.phase != SpanPhase::filter) {
        st.distinct_spans = build_count_store(options.inputs, options.params, store, options.threads, ro);
        if (options.phase == SpanPhase::sign) return result;
    }

    const SpanCountStore counts = SpanCountStore::open(store);
    st.distinct_spans = counts.size();

    struct ShardOut {
        std::map<std::string, SourceSpanStats> sources;
        ShardManifest manifest;
        ReadStats read;
    };
    std::vector<ShardOut> outs(options.inputs.size());

    clear_stage_shards(options.output_dir);
    parallel_for(options.inputs.size(), options.threads, [&](std::size_t s) {
        auto& o = outs[s];
        const auto name = shard_file_name(s, options.compress);
        ShardWriter writer((fs::path(options.output_dir) / name).string(), options.unit);
        o.read = read_shard(options.inputs[s], s, ro, [&](Document&& doc) {
            auto& src = o.sources[doc.source()];
            ++src.input_docs;
            src.input_units += options.unit.of(doc);
            auto r = apply_span_filter(doc.text(), counts, options.params);
            src.removed_sentences += r.removed_sentences;
            if (r.modified) ++src.modified_docs;
            if (r.discard) {
                ++src.discarded_docs;
                return;
            }
            if (r.modified) doc.set_text(std::move(r.text));
            ++src.output_docs;
            src.output_units += options.unit.of(doc);
            writer.write(doc);
        });
        o.manifest = writer.commit();
        o.manifest.shard_paths = {name};
        o.manifest.malformed = o.read.malformed;
    });

    st.source_order = options.source_order;
    for (const auto& name : options.source_order) st.sources[name];
    for (const auto& o : outs) {
        for (const auto& [name, s] : o.sources) {
            if (std::find(st.source_order.begin(), st.source_order.end(), name) == st.source_order.end()) {
                st.source_order.push_back(name);
            }
            auto& t = st.sources[name];
            t.input_docs += s.input_docs;
            t.output_docs += s.output_docs;
            t.input_units += s.input_units;
            t.output_units += s.output_units;
            t.modified_docs += s.modified_docs;
            t.discarded_docs += s.discarded_docs;
            t.removed_sentences += s.removed_sentences;
        }
        st.malformed += o.read.malformed;
        result.manifest.merge(o.manifest);
    }
    result.manifest.save((fs::path(options.output_dir) / "manifest.json").string());
    write_file_atomic((fs::path(options.output_dir) / "stats.json").string(), st.to_json().dump(2) + "\n");
    return result;
}

} // namespace curate
