#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace curate {

using SpanHash = std::array<std::uint8_t, 16>;

SpanHash md5(std::string_view data);
std::string to_hex(const SpanHash& h);

struct SpanHashHasher {
    std::size_t operator()(const SpanHash& h) const noexcept {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(h[i]) << (8 * i);
        return static_cast<std::size_t>(v);
    }
};

class SpanCountLookup {
public:
    virtual ~SpanCountLookup() = default;
    virtual std::uint64_t count(const SpanHash& h) const = 0;
};

// In-memory partial store owned by one writer.
class SpanCountBuilder final : public SpanCountLookup {
public:
    void add(const SpanHash& h, std::uint64_t n = 1) { counts_[h] += n; }
    void merge(const SpanCountBuilder& other);

    std::uint64_t count(const SpanHash& h) const override;
    std::size_t size() const noexcept { return counts_.size(); }

    // Sorted by key.
    std::vector<std::pair<SpanHash, std::uint64_t>> entries() const;

    void write(const std::string& path) const;

private:
    std::unordered_map<SpanHash, std::uint64_t, SpanHashHasher> counts_;
};

// Read-only view over a store file: 8-byte magic, little-endian entry count,
// then (16-byte key, 8-byte little-endian count) records sorted by key.
// The file is memory-mapped, so any number of threads may query it.
class SpanCountStore final : public SpanCountLookup {
public:
    static SpanCountStore open(const std::string& path);

    SpanCountStore(SpanCountStore&& other) noexcept;
    SpanCountStore& operator=(SpanCountStore&& other) noexcept;
    SpanCountStore(const SpanCountStore&) = delete;
    SpanCountStore& operator=(const SpanCountStore&) = delete;
    ~SpanCountStore() override;

    std::uint64_t count(const SpanHash& h) const override;
    std::size_t size() const noexcept { return entries_; }

    SpanHash key_at(std::size_t i) const noexcept;
    std::uint64_t count_at(std::size_t i) const noexcept;
    void for_each(const std::function<void(const SpanHash&, std::uint64_t)>& fn) const;

private:
    SpanCountStore() = default;
    const unsigned char* record(std::size_t i) const noexcept;

    void* map_ = nullptr;
    std::size_t map_len_ = 0;
    std::size_t entries_ = 0;
};

// Streams a k-way merge of sorted store files into `output`, summing the
// counts of equal keys.
void merge_span_stores(const std::vector<std::string>& inputs, const std::string& output);

} // namespace curate
