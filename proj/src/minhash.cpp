#include "minhash.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "error.hpp"
#include "parallel.hpp"
#include "quality_filter.hpp"
#include "utf8.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define CURATE_HAVE_AVX512_KERNEL 1
#include <immintrin.h>
#endif

namespace curate {

namespace fs = std::filesystem;

namespace detail {

void min_hash_kernel_portable(const std::uint64_t* g1, const std::uint64_t* g2, std::size_t n, std::uint64_t* out,
                              std::size_t width) {
    for (std::size_t k = 0; k < width; ++k) out[k] = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t v = g1[i];
        for (std::size_t k = 0; k < width; ++k, v += g2[i]) out[k] = v < out[k] ? v : out[k];
    }
}

#ifdef CURATE_HAVE_AVX512_KERNEL
// Lane j of block t holds position 8t+j. Lanes advance by 8*g2 from one
// block to the next.
template <std::size_t Blocks>
__attribute__((target("avx512f"))) void min_hash_kernel_avx512(const std::uint64_t* g1, const std::uint64_t* g2,
                                                                std::size_t n, std::uint64_t* out) {
    __m512i m[Blocks];
    for (auto& x : m) x = _mm512_set1_epi64(-1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t s = g2[i];
        const std::uint64_t b = g1[i];
        __m512i v = _mm512_set_epi64(static_cast<long long>(b + 7 * s), static_cast<long long>(b + 6 * s),
                                     static_cast<long long>(b + 5 * s), static_cast<long long>(b + 4 * s),
                                     static_cast<long long>(b + 3 * s), static_cast<long long>(b + 2 * s),
                                     static_cast<long long>(b + s), static_cast<long long>(b));
        const __m512i step = _mm512_set1_epi64(static_cast<long long>(8 * s));
        for (std::size_t t = 0; t < Blocks; ++t) {
            m[t] = _mm512_min_epu64(m[t], v);
            v = _mm512_add_epi64(v, step);
        }
    }
    for (std::size_t t = 0; t < Blocks; ++t) _mm512_storeu_si512(out + 8 * t, m[t]);
}

bool have_avx512() {
    static const bool yes = __builtin_cpu_supports("avx512f");
    return yes;
}
#endif

void min_hash_kernel(const std::uint64_t* g1, const std::uint64_t* g2, std::size_t n, std::uint64_t* out,
                     std::size_t width) {
#ifdef CURATE_HAVE_AVX512_KERNEL
    if (width == 112 && have_avx512()) {
        min_hash_kernel_avx512<14>(g1, g2, n, out);
        return;
    }
#endif
    min_hash_kernel_portable(g1, g2, n, out, width);
}

} // namespace detail

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t fmix64(std::uint64_t h) noexcept {
    h ^= h >> 33;
    h *= 0xFF51AFD7ED558CCDULL;
    h ^= h >> 33;
    h *= 0xC4CEB9FE1A85EC53ULL;
    h ^= h >> 33;
    return h;
}

// Counter-based: the i-th output of a splitmix64 stream seeded with `seed`.
constexpr std::uint64_t splitmix_at(std::uint64_t seed, std::uint64_t i) noexcept {
    std::uint64_t z = seed + (i + 1) * kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t load_le64(const char* p, std::size_t n) noexcept {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

// Appends the normalized text and records the byte offset of every scalar
// (plus the end offset).
void normalize_with_offsets(std::string_view text, std::string& out, std::vector<std::uint32_t>& offsets) {
    out.clear();
    offsets.clear();
    bool pending_space = false;
    for (std::size_t pos = 0; pos < text.size();) {
        const char32_t c = text::next_scalar(text, pos);
        if (text::is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            offsets.push_back(static_cast<std::uint32_t>(out.size()));
            out.push_back(' ');
            pending_space = false;
        }
        offsets.push_back(static_cast<std::uint32_t>(out.size()));
        text::append_utf8(out, text::to_lower(c));
    }
    offsets.push_back(static_cast<std::uint32_t>(out.size()));
}

// Calls fn(bytes) for every shingle window of the normalized text.
template <typename Fn>
void for_each_shingle(std::string_view text, const MinHashParams& params, Fn&& fn) {
    thread_local std::string norm;
    thread_local std::vector<std::uint32_t> offsets;
    normalize_with_offsets(text, norm, offsets);
    if (norm.empty()) return;
    const std::string_view s = norm;
    const std::size_t len = params.shingle_len;

    if (params.unit == ShingleUnit::chars) {
        const std::size_t count = offsets.size() - 1;
        if (count < len) {
            fn(s);
            return;
        }
        for (std::size_t i = 0; i + len <= count; ++i) fn(s.substr(offsets[i], offsets[i + len] - offsets[i]));
        return;
    }

    // Word windows: the normalized text separates words by single spaces.
    thread_local std::vector<std::uint32_t> starts;
    starts.clear();
    starts.push_back(0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ' ') starts.push_back(static_cast<std::uint32_t>(i + 1));
    }
    const std::size_t words = starts.size();
    if (words < len) {
        fn(s);
        return;
    }
    for (std::size_t i = 0; i + len <= words; ++i) {
        const std::size_t end = (i + len < words) ? starts[i + len] - 1 : s.size();
        fn(s.substr(starts[i], end - starts[i]));
    }
}

void put_le64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

void MinHashParams::validate() const {
    if (shingle_len == 0) throw UsageError("shingle length must be positive");
    if (bands == 0 || rows_per_band == 0) throw UsageError("bands and rows per band must be positive");
    if (bucket_cap < 2) throw UsageError("bucket cap must be at least 2");
}

std::string normalize_for_shingling(std::string_view text) {
    std::string out;
    std::vector<std::uint32_t> offsets;
    normalize_with_offsets(text, out, offsets);
    return out;
}

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) noexcept {
    constexpr std::uint64_t c1 = 0x87C37B91114253D5ULL;
    constexpr std::uint64_t c2 = 0x4CF5AD432745937FULL;
    std::uint64_t h = seed ^ (bytes.size() * kGolden);
    const char* p = bytes.data();
    std::size_t n = bytes.size();
    while (n >= 8) {
        std::uint64_t k = load_le64(p, 8);
        k *= c1;
        k = std::rotl(k, 31);
        k *= c2;
        h ^= k;
        h = std::rotl(h, 27) * 5 + 0x52DCE729;
        p += 8;
        n -= 8;
    }
    if (n > 0) {
        std::uint64_t k = load_le64(p, n);
        k *= c1;
        k = std::rotl(k, 31);
        k *= c2;
        h ^= k;
    }
    return fmix64(h);
}

std::vector<std::uint64_t> shingle(std::string_view text, const MinHashParams& params) {
    params.validate();
    std::vector<std::uint64_t> out;
    for_each_shingle(text, params, [&](std::string_view w) { out.push_back(hash_bytes(w)); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
    if (a.empty() && b.empty()) throw UsageError("jaccard of two empty sets is undefined");
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t inter = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

MinHasher::MinHasher(MinHashParams params)
    : params_(std::move(params)), key1_(splitmix_at(params_.seed, 0)), key2_(splitmix_at(params_.seed, 1)) {
    params_.validate();
}

void MinHasher::sign(std::span<const std::uint64_t> shingles, std::span<std::uint64_t> out) const {
    if (shingles.empty()) throw DataError("cannot sign an empty shingle set");
    if (out.size() != width()) throw UsageError("signature buffer has the wrong width");
    thread_local std::vector<std::uint64_t> g1;
    thread_local std::vector<std::uint64_t> g2;
    g1.resize(shingles.size());
    g2.resize(shingles.size());
    for (std::size_t i = 0; i < shingles.size(); ++i) {
        g1[i] = fmix64(shingles[i] ^ key1_);
        g2[i] = fmix64(shingles[i] ^ key2_) | 1;
    }
    detail::min_hash_kernel(g1.data(), g2.data(), shingles.size(), out.data(), out.size());
}

std::vector<std::uint64_t> MinHasher::sign(std::span<const std::uint64_t> shingles) const {
    std::vector<std::uint64_t> out(width());
    sign(shingles, out);
    return out;
}

void MinHasher::sign_text(std::string_view text, std::span<std::uint64_t> out) const {
    thread_local std::vector<std::uint64_t> hashes;
    hashes.clear();
    for_each_shingle(text, params_, [&](std::string_view w) { hashes.push_back(hash_bytes(w)); });
    sign(hashes, out);
}

std::vector<std::uint64_t> MinHasher::sign_text(std::string_view text) const {
    std::vector<std::uint64_t> out(width());
    sign_text(text, out);
    return out;
}

void SignatureTable::append(std::span<const std::uint64_t> row) {
    if (row.size() != width_) throw UsageError("signature width mismatch");
    values_.insert(values_.end(), row.begin(), row.end());
}

CandidateResult candidate_pairs(const SignatureTable& signatures, const MinHashParams& params) {
    params.validate();
    if (signatures.width() != params.num_hashes()) throw UsageError("signature width does not match bands x rows");
    const std::size_t n = signatures.size();
    if (n > std::numeric_limits<std::uint32_t>::max()) throw UsageError("too many signatures for one table");

    CandidateResult result;
    std::vector<std::uint32_t> order(n);
    for (std::size_t band = 0; band < params.bands; ++band) {
        const std::size_t off = band * params.rows_per_band;
        const std::size_t bytes = params.rows_per_band * sizeof(std::uint64_t);
        auto key = [&](std::uint32_t i) { return signatures.row(i).data() + off; };
        auto less = [&](std::uint32_t a, std::uint32_t b) {
            const auto* ka = key(a);
            const auto* kb = key(b);
            for (std::size_t r = 0; r < params.rows_per_band; ++r) {
                if (ka[r] != kb[r]) return ka[r] < kb[r];
            }
            return a < b;
        };
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), less);

        std::size_t start = 0;
        while (start < n) {
            std::size_t end = start + 1;
            while (end < n && std::memcmp(key(order[start]), key(order[end]), bytes) == 0) ++end;
            const std::size_t size = end - start;
            if (size > params.bucket_cap) {
                ++result.oversized_buckets;
                for (std::size_t i = start + 1; i < end; ++i) result.pairs.emplace_back(order[start], order[i]);
            } else {
                for (std::size_t i = start; i < end; ++i) {
                    for (std::size_t j = i + 1; j < end; ++j) result.pairs.emplace_back(order[i], order[j]);
                }
            }
            start = end;
        }
    }
    // Within a bucket members are ascending, so every pair is already (small, large).
    std::sort(result.pairs.begin(), result.pairs.end());
    result.pairs.erase(std::unique(result.pairs.begin(), result.pairs.end()), result.pairs.end());
    return result;
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0u);
}

std::uint32_t UnionFind::find(std::uint32_t x) noexcept {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

bool UnionFind::unite(std::uint32_t a, std::uint32_t b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
}

std::vector<std::vector<std::uint32_t>> connected_components(std::size_t n, std::span<const DocPair> pairs) {
    UnionFind uf(n);
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n) throw UsageError("pair references a node outside the graph");
        uf.unite(a, b);
    }
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<std::vector<std::uint32_t>> groups;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto root = uf.find(i);
        auto [it, fresh] = slot.try_emplace(root, groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    // Members were appended in ascending order and groups created in order of
    // their smallest member.
    std::erase_if(groups, [](const auto& g) { return g.size() < 2; });
    return groups;
}

RepresentativeSelection select_representatives(const std::vector<std::vector<ClusterMember>>& clusters,
                                                const std::vector<std::string>& priority) {
    std::unordered_map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < priority.size(); ++i) rank.emplace(priority[i], i);
    auto rank_of = [&](const ClusterMember& m) {
        auto it = rank.find(m.source);
        if (it == rank.end()) throw DataError("unknown source tag '" + m.source + "' on document " + m.id);
        return it->second;
    };

    RepresentativeSelection out;
    for (const auto& members : clusters) {
        if (members.empty()) continue;
        std::size_t best = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto ri = rank_of(members[i]);
            const auto rb = rank_of(members[best]);
            if (ri < rb || (ri == rb && members[i].id < members[best].id)) best = i;
        }
        out.keep.push_back(members[best].id);
        if (members.size() < 2) continue;

        DuplicateCluster c;
        c.representative_id = members[best].id;
        c.representative_units = members[best].units;
        std::vector<SourceShare> shares(priority.size());
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto& m = members[i];
            c.member_ids.push_back(m.id);
            auto& share = shares[rank_of(m)];
            share.source = m.source;
            ++share.docs;
            share.units += m.units;
            if (i != best) {
                out.remove.push_back(m.id);
                c.token_units += m.units;
            }
        }
        for (auto& s : shares) {
            if (s.docs == 0) continue;
            c.sources.push_back(s.source);
            c.shares.push_back(std::move(s));
        }
        out.clusters.push_back(std::move(c));
    }
    return out;
}

nlohmann::json ConsensusRecord::to_json() const {
    nlohmann::json docs = nlohmann::json::object();
    nlohmann::json units_by_source = nlohmann::json::object();
    for (const auto& s : shares) {
        docs[s.source] = s.docs;
        units_by_source[s.source] = s.units;
    }
    return {
        {"id", id},
        {"text", text},
        {"sources", sources},
        {"cluster_size", cluster_size},
        {"units", units},
        {"representative_units", representative_units},
        {"source_docs", docs},
        {"source_units", units_by_source},
        {"members", members},
    };
}

ConsensusRecord ConsensusRecord::from_json(const nlohmann::json& j) {
    ConsensusRecord r;
    r.id = j.value("id", std::string());
    r.text = j.at("text").get<std::string>();
    r.sources = j.at("sources").get<std::vector<std::string>>();
    r.cluster_size = j.at("cluster_size").get<std::uint64_t>();
    r.units = j.value("units", std::uint64_t{0});
    r.representative_units = j.value("representative_units", std::uint64_t{0});
    const auto docs = j.value("source_docs", nlohmann::json::object());
    const auto units = j.value("source_units", nlohmann::json::object());
    for (const auto& s : r.sources) {
        r.shares.push_back({s, docs.value(s, std::uint64_t{0}), units.value(s, std::uint64_t{0})});
    }
    r.members = j.value("members", std::vector<std::string>{});
    return r;
}

std::vector<ConsensusRecord> read_consensus(const std::string& path) {
    std::vector<ConsensusRecord> out;
    const std::string body = read_file(path);
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < body.size()) {
        std::size_t nl = body.find('\n', start);
        if (nl == std::string::npos) nl = body.size();
        const std::string_view line(body.data() + start, nl - start);
        ++line_no;
        start = nl + 1;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON");
        try {
            out.push_back(ConsensusRecord::from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_signature_file(const std::string& path, std::span<const std::uint64_t> refs,
                          const SignatureTable& table) {
    if (refs.size() != table.size()) throw UsageError("one ref per signature row is required");
    std::string buf;
    buf.reserve(table.size() * (table.width() + 1) * 8);
    for (std::size_t i = 0; i < table.size(); ++i) {
        put_le64(buf, refs[i]);
        for (auto v : table.row(i)) put_le64(buf, v);
    }
    write_file_atomic(path, buf);
}

SignatureTable read_signature_file(const std::string& path, std::size_t width, std::vector<std::uint64_t>* refs) {
    const std::string body = read_file(path);
    const std::size_t record = (width + 1) * 8;
    if (body.size() % record != 0) throw DataError("signature file has a truncated record: " + path);
    SignatureTable table(width);
    table.reserve(body.size() / record);
    if (refs != nullptr) refs->clear();
    const auto* p = reinterpret_cast<const unsigned char*>(body.data());
    for (std::size_t off = 0; off < body.size(); off += record) {
        if (refs != nullptr) refs->push_back(get_le64(p + off));
        auto row = table.append();
        for (std::size_t k = 0; k < width; ++k) row[k] = get_le64(p + off + 8 * (k + 1));
    }
    return table;
}

nlohmann::json MinHashStats::to_json() const {
    nlohmann::json src = nlohmann::json::array();
    for (const auto& name : source_order) {
        const auto& s = sources.at(name);
        src.push_back({
            {"name", name},
            {"input_docs", s.input_docs},
            {"output_docs", s.output_docs},
            {"input_units", s.input_units},
            {"output_units", s.output_units},
        });
    }
    return {
        {"stage", "minhash"},
        {"unit", unit_label},
        {"sources", src},
        {"candidate_pairs", candidate_pairs},
        {"oversized_buckets", oversized_buckets},
        {"clusters", clusters},
        {"clustered_docs", clustered_docs},
        {"removed_docs", removed_docs},
        {"malformed", malformed},
    };
}

MinHashStats MinHashStats::from_json(const nlohmann::json& j) {
    try {
        MinHashStats s;
        s.unit_label = j.at("unit").get<std::string>();
        for (const auto& e : j.at("sources")) {
            const auto name = e.at("name").get<std::string>();
            s.source_order.push_back(name);
            s.sources[name] = {e.at("input_docs").get<std::uint64_t>(), e.at("output_docs").get<std::uint64_t>(),
                               e.at("input_units").get<std::uint64_t>(), e.at("output_units").get<std::uint64_t>()};
        }
        s.candidate_pairs = j.value("candidate_pairs", std::uint64_t{0});
        s.oversized_buckets = j.value("oversized_buckets", std::uint64_t{0});
        s.clusters = j.value("clusters", std::uint64_t{0});
        s.clustered_docs = j.value("clustered_docs", std::uint64_t{0});
        s.removed_docs = j.value("removed_docs", std::uint64_t{0});
        s.malformed = j.value("malformed", std::uint64_t{0});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid minhash stats: ") + e.what());
    }
}

MinHashStageResult run_minhash_stage(const MinHashStageOptions& options) {
    const MinHashParams& params = options.params;
    params.validate();
    if (options.priority.empty()) throw UsageError("minhash stage needs a source priority list");
    std::unordered_map<std::string, std::uint32_t> rank;
    for (std::size_t i = 0; i < options.priority.size(); ++i) {
        if (!rank.emplace(options.priority[i], static_cast<std::uint32_t>(i)).second) {
            throw UsageError("duplicate source in priority list: " + options.priority[i]);
        }
    }

    const MinHasher hasher(params);
    const std::size_t width = hasher.width();
    const std::size_t shards = options.inputs.size();

    struct Meta {
        std::string id;
        std::uint32_t source = 0;
        std::uint64_t units = 0;
    };
    struct ShardPass {
        std::vector<Meta> meta;
        SignatureTable table;
        ReadStats read;
    };
    std::vector<ShardPass> pass;
    pass.reserve(shards);
    for (std::size_t i = 0; i < shards; ++i) pass.push_back({{}, SignatureTable(width), {}});

    ReadOptions ro;
    ro.required_field = options.unit.field;

    parallel_for(shards, options.threads, [&](std::size_t s) {
        auto& p = pass[s];
        p.read = read_shard(options.inputs[s], s, ro, [&](Document&& doc) {
            auto it = rank.find(doc.source());
            if (it == rank.end()) {
                throw DataError("unknown source tag '" + doc.source() + "' in " + options.inputs[s]);
            }
            hasher.sign_text(doc.text(), p.table.append());
            p.meta.push_back({doc.id(), it->second, options.unit.of(doc)});
        });
    });

    std::vector<std::size_t> offset(shards + 1, 0);
    for (std::size_t s = 0; s < shards; ++s) offset[s + 1] = offset[s] + pass[s].meta.size();
    const std::size_t total = offset[shards];

    clear_stage_shards(options.output_dir);
    const fs::path sig_dir = fs::path(options.output_dir) / "signatures";
    clear_stage_shards(sig_dir.string());

    SignatureTable all(width);
    all.reserve(total);
    std::vector<Meta> meta;
    meta.reserve(total);
    {
        std::unordered_set<std::string_view> ids;
        for (std::size_t s = 0; s < shards; ++s) {
            std::vector<std::uint64_t> refs(pass[s].meta.size());
            std::iota(refs.begin(), refs.end(), static_cast<std::uint64_t>(offset[s]));
            char name[32];
            std::snprintf(name, sizeof name, "shard-%05zu.sig", s);
            write_signature_file((sig_dir / name).string(), refs, pass[s].table);
            for (std::size_t i = 0; i < pass[s].meta.size(); ++i) all.append(pass[s].table.row(i));
            pass[s].table = SignatureTable(width);
            for (auto& m : pass[s].meta) meta.push_back(std::move(m));
            pass[s].meta.clear();
        }
        for (const auto& m : meta) {
            if (!ids.insert(m.id).second) throw DataError("duplicate document id: " + m.id);
        }
    }

    const CandidateResult cand = candidate_pairs(all, params);
    all = SignatureTable(width);
    const auto components = connected_components(total, cand.pairs);

    std::vector<std::vector<ClusterMember>> groups;
    groups.reserve(components.size());
    for (const auto& comp : components) {
        auto& g = groups.emplace_back();
        for (auto ord : comp) g.push_back({meta[ord].id, options.priority[meta[ord].source], meta[ord].units});
    }
    const RepresentativeSelection sel = select_representatives(groups, options.priority);

    // Map the selection back onto ordinals.
    std::vector<std::uint8_t> removed(total, 0);
    std::vector<std::int64_t> rep_slot(total, -1);
    {
        std::unordered_map<std::string_view, std::uint32_t> ord_of;
        for (const auto& comp : components) {
            for (auto ord : comp) ord_of.emplace(meta[ord].id, ord);
        }
        for (const auto& id : sel.remove) removed[ord_of.at(id)] = 1;
        for (std::size_t c = 0; c < sel.clusters.size(); ++c) rep_slot[ord_of.at(sel.clusters[c].representative_id)] = static_cast<std::int64_t>(c);
    }

    std::vector<std::string> rep_text(sel.clusters.size());
    std::vector<ShardManifest> manifests(shards);
    parallel_for(shards, options.threads, [&](std::size_t s) {
        const auto name = shard_file_name(s, options.compress);
        ShardWriter writer((fs::path(options.output_dir) / name).string(), options.unit);
        std::size_t ord = offset[s];
        read_shard(options.inputs[s], s, ro, [&](Document&& doc) {
            const std::size_t o = ord++;
            if (rep_slot[o] >= 0) rep_text[static_cast<std::size_t>(rep_slot[o])] = doc.text();
            if (!removed[o]) writer.write(doc);
        });
        if (ord != offset[s + 1]) throw DataError("shard changed between passes: " + options.inputs[s]);
        manifests[s] = writer.commit();
        manifests[s].shard_paths = {name};
    });

    std::string consensus;
    for (std::size_t c = 0; c < sel.clusters.size(); ++c) {
        const auto& cl = sel.clusters[c];
        ConsensusRecord r;
        r.id = cl.representative_id;
        r.text = std::move(rep_text[c]);
        r.sources = cl.sources;
        r.cluster_size = cl.member_ids.size();
        r.units = cl.token_units;
        r.representative_units = cl.representative_units;
        r.shares = cl.shares;
        r.members = cl.member_ids;
        consensus += r.to_json().dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        consensus.push_back('\n');
    }
    write_file_atomic((fs::path(options.output_dir) / "consensus.jsonl").string(), consensus);

    MinHashStageResult result;
    MinHashStats& st = result.stats;
    st.unit_label = options.unit.label();
    st.source_order = options.priority;
    for (const auto& name : options.priority) st.sources[name];
    for (std::size_t o = 0; o < total; ++o) {
        auto& s = st.sources[options.priority[meta[o].source]];
        ++s.input_docs;
        s.input_units += meta[o].units;
        if (!removed[o]) {
            ++s.output_docs;
            s.output_units += meta[o].units;
        }
    }
    st.candidate_pairs = cand.pairs.size();
    st.oversized_buckets = cand.oversized_buckets;
    st.clusters = sel.clusters.size();
    for (const auto& comp : components) st.clustered_docs += comp.size();
    st.removed_docs = sel.remove.size();
    for (const auto& p : pass) st.malformed += p.read.malformed;

    for (std::size_t s = 0; s < shards; ++s) {
        manifests[s].malformed = pass[s].read.malformed;
        result.manifest.merge(manifests[s]);
    }
    result.manifest.save((fs::path(options.output_dir) / "manifest.json").string());
    write_file_atomic((fs::path(options.output_dir) / "stats.json").string(), st.to_json().dump(2) + "\n");
    return result;
}

} // namespace curate
