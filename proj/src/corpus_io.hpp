#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "document.hpp"

namespace curate {

// Lexicographically sorted paths matching a shell glob. Throws IoError when
// nothing matches.
std::vector<std::string> expand_glob(const std::string& pattern);

struct ReadOptions {
    // When set, every record is attributed to this source and any "source"
    // field in the record is ignored. When empty, records must carry one.
    std::string source;
    // Records lacking a non-negative integer in this field count as malformed.
    std::string required_field;
};

struct ReadStats {
    std::uint64_t records = 0;
    std::uint64_t malformed = 0;

    ReadStats& operator+=(const ReadStats& o) {
        records += o.records;
        malformed += o.malformed;
        return *this;
    }
};

// Parses one JSON-lines record. Returns false for malformed input. Absent ids
// become "<source>/<shard_index>/<line_index>".
bool parse_record(std::string_view line, std::size_t shard_index, std::size_t line_index,
                  const ReadOptions& options, Document& out);

std::string serialize_record(const Document& doc);

// Streams the records of one shard in line order. Blank lines are skipped
// without being tallied. Gzip input is detected by content, so ".gz" shards
// and plain shards read the same way.
ReadStats read_shard(const std::string& path, std::size_t shard_index, const ReadOptions& options,
                     const std::function<void(Document&&)>& sink);

std::vector<Document> read_shards(const std::vector<std::string>& paths, const ReadOptions& options,
                                  ReadStats* stats = nullptr);

std::vector<Document> read_shards(const std::string& pattern, std::string_view source,
                                  ReadStats* stats = nullptr);

struct ShardManifest {
    std::vector<std::string> shard_paths;
    std::map<std::string, std::uint64_t> per_source_doc_counts;
    std::map<std::string, std::uint64_t> per_source_unit_counts;
    std::uint64_t malformed = 0;

    void add(const std::string& source, std::uint64_t units);
    void merge(const ShardManifest& other);
    std::uint64_t total_docs() const;
    std::uint64_t total_units() const;

    nlohmann::json to_json() const;
    static ShardManifest from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static ShardManifest load(const std::string& path);
};

// Writes into "<path>.partial" and renames on commit(). A writer destroyed
// without commit() deletes the partial file. Paths ending in ".gz" are
// gzip-compressed.
class ShardWriter {
public:
    ShardWriter(std::string path, CountUnit unit);
    ~ShardWriter();
    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;

    void write(const Document& doc);
    ShardManifest commit();

    const std::string& path() const noexcept { return path_; }

private:
    class Sink;

    std::string path_;
    std::string partial_;
    CountUnit unit_;
    std::unique_ptr<Sink> sink_;
    ShardManifest manifest_;
    bool committed_ = false;
};

ShardManifest write_shard(std::span<const Document> docs, const std::string& path,
                          const CountUnit& unit = CountUnit::words());

// Removes shard files (and leftover partial files) from a stage directory so
// a rerun never mixes old and new shards.
void clear_stage_shards(const std::string& dir);

// Writes a whole file atomically (temp file + rename).
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

} // namespace curate
