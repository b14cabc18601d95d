#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpus_io.hpp"
#include "document.hpp"
#include "span_store.hpp"

namespace curate {

struct SpanParams {
    std::size_t span_size = 3;
    std::size_t min_sentence_words = 5;
    std::uint64_t dup_threshold = 3;
    std::size_t min_doc_words_after = 50;

    void validate() const;
    nlohmann::json to_json() const;
};

struct Sentence {
    std::string_view text;  // trimmed view into the source text
    std::size_t line = 0;   // index of the newline-separated line holding it
    std::size_t words = 0;
};

// Splits on . ! ? and U+061F; a run of delimiters stays with the sentence it
// closes. Newlines end a sentence too. Blank sentences are dropped.
std::vector<Sentence> split_sentences(std::string_view text);

struct SpanSignature {
    SpanHash hash{};
    std::size_t first = 0;  // sentence indices, inclusive
    std::size_t last = 0;
};

// Windows of span_size consecutive eligible sentences. Indices refer to the
// full sentence list, so a window may straddle dropped short sentences.
std::vector<SpanSignature> span_signatures(const std::vector<Sentence>& sentences, const SpanParams& params);

// The string that gets hashed for a window of sentences.
std::string span_key(const std::vector<std::string_view>& sentences);

void count_spans(std::string_view text, const SpanParams& params, SpanCountBuilder& into);

struct SpanFilterResult {
    bool discard = false;
    bool modified = false;
    std::size_t removed_sentences = 0;
    std::string text;
};

SpanFilterResult apply_span_filter(std::string_view text, const SpanCountLookup& counts, const SpanParams& params);

// Counts spans over every shard (one partial store per shard, then a merge)
// and writes the merged store to store_path.
std::uint64_t build_count_store(const std::vector<std::string>& shards, const SpanParams& params,
                                const std::string& store_path, unsigned threads = 0,
                                const ReadOptions& read_options = {});

struct SourceSpanStats {
    std::uint64_t input_docs = 0;
    std::uint64_t output_docs = 0;
    std::uint64_t input_units = 0;
    std::uint64_t output_units = 0;
    std::uint64_t modified_docs = 0;
    std::uint64_t discarded_docs = 0;
    std::uint64_t removed_sentences = 0;
};

struct SentDedupStats {
    std::string unit_label = "words";
    std::vector<std::string> source_order;
    std::map<std::string, SourceSpanStats> sources;
    std::uint64_t distinct_spans = 0;
    std::uint64_t malformed = 0;

    SourceSpanStats total() const;
    nlohmann::json to_json() const;
    static SentDedupStats from_json(const nlohmann::json& j);
};

enum class SpanPhase { sign, filter, both };
SpanPhase parse_span_phase(std::string_view s);

struct SentDedupStageOptions {
    std::vector<std::string> inputs;  // shard paths, already expanded
    std::string output_dir;
    std::string store_path;           // defaults to <output_dir>/spans.store
    SpanParams params;
    SpanPhase phase = SpanPhase::both;
    std::string source;  // when set, overrides the records' own source tags
    std::vector<std::string> source_order;  // report order; unseen sources appended
    CountUnit unit;
    unsigned threads = 0;
    bool compress = false;
};

struct SentDedupStageResult {
    SentDedupStats stats;
    ShardManifest manifest;
};

SentDedupStageResult run_sentdedup_stage(const SentDedupStageOptions& options);

} // namespace curate
