#include "span_store.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <queue>
#include <utility>

#include "error.hpp"

namespace curate {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'A', 'N', 'C', 'N', 'T', '1'};
constexpr std::size_t kHeader = 16;
constexpr std::size_t kRecord = 24;

void put_le64(unsigned char* out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
}

std::uint64_t get_le64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

// Buffered writer for the store format. The entry count in the header is
// patched on close.
class StoreWriter {
public:
    explicit StoreWriter(const std::string& path) : path_(path), partial_(path + ".partial") {
        const auto parent = std::filesystem::path(path).parent_path();
        std::error_code ec;
        if (!parent.empty()) std::filesystem::create_directories(parent, ec);
        out_.open(partial_, std::ios::binary | std::ios::trunc);
        if (!out_) throw IoError("cannot create span store " + partial_);
        unsigned char header[kHeader] = {};
        std::memcpy(header, kMagic, 8);
        out_.write(reinterpret_cast<const char*>(header), kHeader);
    }
    ~StoreWriter() {
        if (!done_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(partial_, ec);
        }
    }

    void add(const SpanHash& key, std::uint64_t count) {
        unsigned char rec[kRecord];
        std::memcpy(rec, key.data(), 16);
        put_le64(rec + 16, count);
        out_.write(reinterpret_cast<const char*>(rec), kRecord);
        ++entries_;
    }

    void finish() {
        unsigned char n[8];
        put_le64(n, entries_);
        out_.seekp(8);
        out_.write(reinterpret_cast<const char*>(n), 8);
        out_.close();
        if (!out_) throw IoError("write failed: " + partial_);
        std::error_code ec;
        std::filesystem::rename(partial_, path_, ec);
        if (ec) throw IoError("cannot finalize " + path_ + ": " + ec.message());
        done_ = true;
    }

private:
    std::string path_;
    std::string partial_;
    std::ofstream out_;
    std::uint64_t entries_ = 0;
    bool done_ = false;
};

} // namespace

SpanHash md5(std::string_view data) {
    SpanHash out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_md5(), nullptr) != 1 || len != 16) {
        throw std::runtime_error("MD5 digest failed");
    }
    return out;
}

std::string to_hex(const SpanHash& h) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(32);
    for (auto b : h) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 0xF]);
    }
    return s;
}

void SpanCountBuilder::merge(const SpanCountBuilder& other) {
    for (const auto& [k, v] : other.counts_) counts_[k] += v;
}

std::uint64_t SpanCountBuilder::count(const SpanHash& h) const {
    auto it = counts_.find(h);
    return it == counts_.end() ? 0 : it->second;
}

std::vector<std::pair<SpanHash, std::uint64_t>> SpanCountBuilder::entries() const {
    std::vector<std::pair<SpanHash, std::uint64_t>> out(counts_.begin(), counts_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

void SpanCountBuilder::write(const std::string& path) const {
    StoreWriter w(path);
    for (const auto& [k, v] : entries()) w.add(k, v);
    w.finish();
}

SpanCountStore SpanCountStore::open(const std::string& path) {
    const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) throw IoError("cannot open span store " + path + ": " + std::strerror(errno));
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw IoError("cannot stat span store " + path);
    }
    const auto len = static_cast<std::size_t>(st.st_size);
    if (len < kHeader) {
        ::close(fd);
        throw DataError("span store is truncated: " + path);
    }
    void* map = ::mmap(nullptr, len, PROT_READ, MAP_PRIVATE, fd, 0);
    ::close(fd);
    if (map == MAP_FAILED) throw IoError("cannot map span store " + path);

    SpanCountStore store;
    store.map_ = map;
    store.map_len_ = len;
    const auto* bytes = static_cast<const unsigned char*>(map);
    if (std::memcmp(bytes, kMagic, 8) != 0) throw DataError("not a span store: " + path);
    store.entries_ = static_cast<std::size_t>(get_le64(bytes + 8));
    if (kHeader + store.entries_ * kRecord != len) throw DataError("span store size mismatch: " + path);
    return store;
}

SpanCountStore::SpanCountStore(SpanCountStore&& other) noexcept
    : map_(other.map_), map_len_(other.map_len_), entries_(other.entries_) {
    other.map_ = nullptr;
    other.map_len_ = 0;
    other.entries_ = 0;
}

SpanCountStore& SpanCountStore::operator=(SpanCountStore&& other) noexcept {
    if (this != &other) {
        if (map_ != nullptr) ::munmap(map_, map_len_);
        map_ = std::exchange(other.map_, nullptr);
        map_len_ = std::exchange(other.map_len_, 0);
        entries_ = std::exchange(other.entries_, 0);
    }
    return *this;
}

SpanCountStore::~SpanCountStore() {
    if (map_ != nullptr) ::munmap(map_, map_len_);
}

const unsigned char* SpanCountStore::record(std::size_t i) const noexcept {
    return static_cast<const unsigned char*>(map_) + kHeader + i * kRecord;
}

std::uint64_t SpanCountStore::count(const SpanHash& h) const {
    std::size_t lo = 0;
    std::size_t hi = entries_;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const int c = std::memcmp(record(mid), h.data(), 16);
        if (c == 0) return get_le64(record(mid) + 16);
        if (c < 0) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return 0;
}

SpanHash SpanCountStore::key_at(std::size_t i) const noexcept {
    SpanHash key;
    std::memcpy(key.data(), record(i), 16);
    return key;
}

std::uint64_t SpanCountStore::count_at(std::size_t i) const noexcept {
    return get_le64(record(i) + 16);
}

void SpanCountStore::for_each(const std::function<void(const SpanHash&, std::uint64_t)>& fn) const {
    for (std::size_t i = 0; i < entries_; ++i) fn(key_at(i), count_at(i));
}

void merge_span_stores(const std::vector<std::string>& inputs, const std::string& output) {
    std::vector<SpanCountStore> stores;
    stores.reserve(inputs.size());
    for (const auto& p : inputs) stores.push_back(SpanCountStore::open(p));

    struct Cursor {
        SpanHash key;
        std::size_t store;
        std::size_t index;
    };
    auto greater = [](const Cursor& a, const Cursor& b) {
        return a.key != b.key ? a.key > b.key : a.store > b.store;
    };
    std::priority_queue<Cursor, std::vector<Cursor>, decltype(greater)> heap(greater);
    for (std::size_t s = 0; s < stores.size(); ++s) {
        if (stores[s].size() > 0) heap.push({stores[s].key_at(0), s, 0});
    }

    StoreWriter w(output);
    while (!heap.empty()) {
        const SpanHash key = heap.top().key;
        std::uint64_t total = 0;
        while (!heap.empty() && heap.top().key == key) {
            Cursor c = heap.top();
            heap.pop();
            const auto& st = stores[c.store];
            total += st.count_at(c.index);
            if (++c.index < st.size()) {
                const SpanHash next = st.key_at(c.index);
                if (!(key < next)) throw DataError("span store is not sorted: " + inputs[c.store]);
                heap.push({next, c.store, c.index});
            }
        }
        w.add(key, total);
    }
    w.finish();
}

} // namespace curate
