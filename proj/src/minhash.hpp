#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus_io.hpp"
#include "document.hpp"

namespace curate {

enum class ShingleUnit : std::uint8_t { chars, words };

struct MinHashParams {
    std::size_t shingle_len = 5;
    std::size_t bands = 14;
    std::size_t rows_per_band = 8;
    std::uint64_t seed = 0;
    ShingleUnit unit = ShingleUnit::chars;
    // Buckets larger than this are merged as one group instead of expanded
    // pairwise.
    std::size_t bucket_cap = 10000;

    std::size_t num_hashes() const noexcept { return bands * rows_per_band; }
    void validate() const;
};

// Lowercased, whitespace runs collapsed to one space, trimmed.
std::string normalize_for_shingling(std::string_view text);

// 64-bit hash of a byte string; the unseeded base for every shingle.
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0) noexcept;

// Sorted distinct hashes of every shingle_len window (characters or words,
// per params.unit) of the normalized text. Texts shorter than one window
// yield the hash of the whole normalized text; an empty text yields nothing.
std::vector<std::uint64_t> shingle(std::string_view text, const MinHashParams& params);

// Jaccard similarity of two sorted distinct sets. Throws UsageError when both
// are empty.
double jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

struct MinHashSignature {
    std::string doc_id;
    std::vector<std::uint64_t> values;
};

// Position k of a signature is min over shingles x of h_k(x), with
// h_k(x) = g1(x) + k * g2(x) (mod 2^64). g1 and g2 are the base hash re-keyed
// by two seeds drawn from the master seed with a counter-based generator; g2
// is forced odd so the k positions of one shingle never coincide.
class MinHasher {
public:
    explicit MinHasher(MinHashParams params);

    const MinHashParams& params() const noexcept { return params_; }
    std::size_t width() const noexcept { return params_.num_hashes(); }

    // Throws DataError on an empty shingle set.
    void sign(std::span<const std::uint64_t> shingles, std::span<std::uint64_t> out) const;
    std::vector<std::uint64_t> sign(std::span<const std::uint64_t> shingles) const;

    // Shingles and signs in one pass without materializing the shingle set.
    // Throws DataError when the text has no shingles.
    void sign_text(std::string_view text, std::span<std::uint64_t> out) const;
    std::vector<std::uint64_t> sign_text(std::string_view text) const;

private:
    MinHashParams params_;
    std::uint64_t key1_;
    std::uint64_t key2_;
};

// Flat row-major storage for many signatures of one width.
class SignatureTable {
public:
    explicit SignatureTable(std::size_t width) : width_(width) {}

    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return width_ == 0 ? 0 : values_.size() / width_; }

    std::span<const std::uint64_t> row(std::size_t i) const {
        return {values_.data() + i * width_, width_};
    }
    std::span<std::uint64_t> append() {
        values_.resize(values_.size() + width_);
        return {values_.data() + values_.size() - width_, width_};
    }
    void append(std::span<const std::uint64_t> row);
    void reserve(std::size_t rows) { values_.reserve(rows * width_); }

private:
    std::size_t width_;
    std::vector<std::uint64_t> values_;
};

using DocPair = std::pair<std::uint32_t, std::uint32_t>;

struct CandidateResult {
    // Sorted, distinct, first < second.
    std::vector<DocPair> pairs;
    // Buckets over the cap; their members are linked as a star (first member
    // to every other) instead of pairwise.
    std::size_t oversized_buckets = 0;
};

// LSH banding: rows i and j are paired when they agree on every value of at
// least one band.
CandidateResult candidate_pairs(const SignatureTable& signatures, const MinHashParams& params);

class UnionFind {
public:
    explicit UnionFind(std::size_t n);
    std::uint32_t find(std::uint32_t x) noexcept;
    bool unite(std::uint32_t a, std::uint32_t b) noexcept;

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

// Connected components with at least two members. Members ascending;
// components ordered by their smallest member.
std::vector<std::vector<std::uint32_t>> connected_components(std::size_t n, std::span<const DocPair> pairs);

struct ClusterMember {
    std::string id;
    std::string source;
    std::uint64_t units = 0;
};

struct SourceShare {
    std::string source;
    std::uint64_t docs = 0;
    std::uint64_t units = 0;
};

struct DuplicateCluster {
    std::vector<std::string> member_ids;
    // Distinct member sources in priority order.
    std::vector<std::string> sources;
    std::string representative_id;
    std::uint64_t representative_units = 0;
    // Units of every member except the representative.
    std::uint64_t token_units = 0;
    // Per-source member counts, priority order.
    std::vector<SourceShare> shares;
};

struct RepresentativeSelection {
    std::vector<DuplicateCluster> clusters;
    std::vector<std::string> keep;
    std::vector<std::string> remove;
};

// The representative is the member from the highest-priority source, ties
// broken by the smallest id. Throws DataError for a source not in `priority`.
RepresentativeSelection select_representatives(const std::vector<std::vector<ClusterMember>>& clusters,
                                                const std::vector<std::string>& priority);

// A removed-duplicate group with its full source attribution.
struct ConsensusRecord {
    std::string id;
    std::string text;
    std::vector<std::string> sources;
    std::uint64_t cluster_size = 0;
    std::uint64_t units = 0;
    std::uint64_t representative_units = 0;
    std::vector<SourceShare> shares;
    std::vector<std::string> members;

    nlohmann::json to_json() const;
    static ConsensusRecord from_json(const nlohmann::json& j);
};

std::vector<ConsensusRecord> read_consensus(const std::string& path);

// Fixed-width little-endian records: 8-byte document ref, then width
// 8-byte values.
void write_signature_file(const std::string& path, std::span<const std::uint64_t> refs,
                          const SignatureTable& table);
SignatureTable read_signature_file(const std::string& path, std::size_t width,
                                   std::vector<std::uint64_t>* refs = nullptr);

struct SourceDedupStats {
    std::uint64_t input_docs = 0;
    std::uint64_t output_docs = 0;
    std::uint64_t input_units = 0;
    std::uint64_t output_units = 0;
};

struct MinHashStats {
    std::string unit_label = "words";
    std::vector<std::string> source_order;
    std::map<std::string, SourceDedupStats> sources;
    std::uint64_t candidate_pairs = 0;
    std::uint64_t oversized_buckets = 0;
    std::uint64_t clusters = 0;
    std::uint64_t clustered_docs = 0;
    std::uint64_t removed_docs = 0;
    std::uint64_t malformed = 0;

    nlohmann::json to_json() const;
    static MinHashStats from_json(const nlohmann::json& j);
};

struct MinHashStageOptions {
    std::vector<std::string> inputs;  // shard paths, already expanded
    std::string output_dir;
    MinHashParams params;
    std::vector<std::string> priority;
    CountUnit unit;
    unsigned threads = 0;
    bool compress = false;
};

struct MinHashStageResult {
    MinHashStats stats;
    ShardManifest manifest;
};

// Signs every document, bands, clusters and keeps one representative per
// cluster. Writes surviving shards one-to-one, signatures/shard-NNNNN.sig,
// consensus.jsonl, manifest.json and stats.json under output_dir.
MinHashStageResult run_minhash_stage(const MinHashStageOptions& options);

} // namespace curate
