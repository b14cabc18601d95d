#include "corpus_io.hpp"

#include <glob.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace curate {

namespace fs = std::filesystem;

namespace {

bool ends_with_gz(std::string_view path) {
    return path.size() >= 3 && path.substr(path.size() - 3) == ".gz";
}

std::string errno_text() { return std::strerror(errno); }

class LineReader {
public:
    explicit LineReader(const std::string& path) : path_(path) {
        file_ = gzopen(path.c_str(), "rb");
        if (file_ == nullptr) throw IoError("cannot open shard " + path + ": " + errno_text());
        gzbuffer(file_, 1 << 18);
    }
    ~LineReader() {
        if (file_ != nullptr) gzclose(file_);
    }
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    // Yields lines without the trailing '\n' (and without a '\r' before it).
    bool next(std::string& line) {
        line.clear();
        for (;;) {
            if (pos_ == len_) {
                if (eof_) return !line.empty();
                fill();
                if (len_ == 0) {
                    eof_ = true;
                    return !line.empty();
                }
            }
            const char* begin = buf_.data() + pos_;
            const void* nl = std::memchr(begin, '\n', len_ - pos_);
            if (nl == nullptr) {
                line.append(begin, len_ - pos_);
                pos_ = len_;
                continue;
            }
            const auto n = static_cast<std::size_t>(static_cast<const char*>(nl) - begin);
            line.append(begin, n);
            pos_ += n + 1;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
    }

private:
    void fill() {
        const int n = gzread(file_, buf_.data(), static_cast<unsigned>(buf_.size()));
        if (n < 0) {
            int code = 0;
            const char* msg = gzerror(file_, &code);
            throw IoError("read error in shard " + path_ + ": " + (msg ? msg : "unknown"));
        }
        len_ = static_cast<std::size_t>(n);
        pos_ = 0;
    }

    std::string path_;
    gzFile file_ = nullptr;
    std::vector<char> buf_ = std::vector<char>(1 << 18);
    std::size_t pos_ = 0;
    std::size_t len_ = 0;
    bool eof_ = false;
};

bool is_blank(std::string_view line) {
    for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r') return false;
    }
    return true;
}

} // namespace

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::string> paths;
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc == GLOB_NOMATCH || paths.empty()) throw IoError("no shards match " + pattern);
    if (rc != 0) throw IoError("cannot expand " + pattern);
    std::sort(paths.begin(), paths.end());
    return paths;
}

bool parse_record(std::string_view line, std::size_t shard_index, std::size_t line_index,
                  const ReadOptions& options, Document& out) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return false;

    auto text = j.find("text");
    if (text == j.end() || !text->is_string()) return false;

    std::string source;
    if (!options.source.empty()) {
        source = options.source;
    } else {
        auto s = j.find("source");
        if (s == j.end() || !s->is_string() || s->get_ref<const std::string&>().empty()) return false;
        source = s->get<std::string>();
    }

    std::string id;
    if (auto it = j.find("id"); it != j.end()) {
        if (it->is_string()) {
            id = it->get<std::string>();
        } else if (it->is_number_integer()) {
            id = it->dump();
        } else {
            return false;
        }
    }
    if (id.empty()) {
        id = source + "/" + std::to_string(shard_index) + "/" + std::to_string(line_index);
    }

    std::string body = std::move(text->get_ref<std::string&>());
    j.erase("text");
    j.erase("id");
    j.erase("source");

    if (!options.required_field.empty()) {
        auto f = j.find(options.required_field);
        const bool ok = f != j.end() &&
                        (f->is_number_unsigned() ||
                         (f->is_number_integer() && f->get<std::int64_t>() >= 0));
        if (!ok) return false;
    }

    out = Document(std::move(id), std::move(body), std::move(source), std::move(j));
    return true;
}

std::string serialize_record(const Document& doc) {
    nlohmann::json j = doc.extra().is_object() ? doc.extra() : nlohmann::json::object();
    j["id"] = doc.id();
    j["text"] = doc.text();
    j["source"] = doc.source();
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ReadStats read_shard(const std::string& path, std::size_t shard_index, const ReadOptions& options,
                     const std::function<void(Document&&)>& sink) {
    LineReader reader(path);
    ReadStats stats;
    std::string line;
    Document doc;
    for (std::size_t line_index = 0; reader.next(line); ++line_index) {
        if (is_blank(line)) continue;
        if (parse_record(line, shard_index, line_index, options, doc)) {
            ++stats.records;
            sink(std::move(doc));
        } else {
            ++stats.malformed;
        }
    }
    return stats;
}

std::vector<Document> read_shards(const std::vector<std::string>& paths, const ReadOptions& options,
                                  ReadStats* stats) {
    std::vector<Document> docs;
    ReadStats total;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        total += read_shard(paths[i], i, options, [&](Document&& d) { docs.push_back(std::move(d)); });
    }
    if (stats != nullptr) *stats = total;
    return docs;
}

std::vector<Document> read_shards(const std::string& pattern, std::string_view source,
                                  ReadStats* stats) {
    ReadOptions options;
    options.source = std::string(source);
    return read_shards(expand_glob(pattern), options, stats);
}

void ShardManifest::add(const std::string& source, std::uint64_t units) {
    ++per_source_doc_counts[source];
    per_source_unit_counts[source] += units;
}

void ShardManifest::merge(const ShardManifest& other) {
    shard_paths.insert(shard_paths.end(), other.shard_paths.begin(), other.shard_paths.end());
    for (const auto& [s, n] : other.per_source_doc_counts) per_source_doc_counts[s] += n;
    for (const auto& [s, n] : other.per_source_unit_counts) per_source_unit_counts[s] += n;
    malformed += other.malformed;
}

std::uint64_t ShardManifest::total_docs() const {
    std::uint64_t n = 0;
    for (const auto& [s, c] : per_source_doc_counts) n += c;
    return n;
}

std::uint64_t ShardManifest::total_units() const {
    std::uint64_t n = 0;
    for (const auto& [s, c] : per_source_unit_counts) n += c;
    return n;
}

nlohmann::json ShardManifest::to_json() const {
    return {
        {"shard_paths", shard_paths},
        {"per_source_doc_counts", per_source_doc_counts},
        {"per_source_unit_counts", per_source_unit_counts},
        {"total_docs", total_docs()},
        {"malformed", malformed},
    };
}

ShardManifest ShardManifest::from_json(const nlohmann::json& j) {
    try {
        ShardManifest m;
        m.shard_paths = j.at("shard_paths").get<std::vector<std::string>>();
        m.per_source_doc_counts = j.at("per_source_doc_counts").get<std::map<std::string, std::uint64_t>>();
        m.per_source_unit_counts = j.at("per_source_unit_counts").get<std::map<std::string, std::uint64_t>>();
        m.malformed = j.value("malformed", std::uint64_t{0});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid manifest: ") + e.what());
    }
}

void ShardManifest::save(const std::string& path) const {
    write_file_atomic(path, to_json().dump(2) + "\n");
}

ShardManifest ShardManifest::load(const std::string& path) {
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw DataError("manifest is not valid JSON: " + path);
    return from_json(j);
}

class ShardWriter::Sink {
public:
    Sink(const std::string& path, bool gzip) : path_(path) {
        if (gzip) {
            gz_ = gzopen(path.c_str(), "wb6");
            if (gz_ == nullptr) throw IoError("cannot create " + path + ": " + errno_text());
            gzbuffer(gz_, 1 << 18);
        } else {
            file_ = std::fopen(path.c_str(), "wb");
            if (file_ == nullptr) throw IoError("cannot create " + path + ": " + errno_text());
        }
    }
    ~Sink() {
        if (gz_ != nullptr) gzclose(gz_);
        if (file_ != nullptr) std::fclose(file_);
    }

    void write(std::string_view data) {
        if (gz_ != nullptr) {
            if (!data.empty() && gzwrite(gz_, data.data(), static_cast<unsigned>(data.size())) == 0) {
                throw IoError("write failed: " + path_);
            }
        } else if (std::fwrite(data.data(), 1, data.size(), file_) != data.size()) {
            throw IoError("write failed: " + path_ + ": " + errno_text());
        }
    }

    void close() {
        if (gz_ != nullptr) {
            const int rc = gzclose(gz_);
            gz_ = nullptr;
            if (rc != Z_OK) throw IoError("close failed: " + path_);
        }
        if (file_ != nullptr) {
            const int rc = std::fclose(file_);
            file_ = nullptr;
            if (rc != 0) throw IoError("close failed: " + path_ + ": " + errno_text());
        }
    }

private:
    std::string path_;
    gzFile gz_ = nullptr;
    std::FILE* file_ = nullptr;
};

ShardWriter::ShardWriter(std::string path, CountUnit unit)
    : path_(std::move(path)), partial_(path_ + ".partial"), unit_(std::move(unit)) {
    const auto parent = fs::path(path_).parent_path();
    std::error_code ec;
    if (!parent.empty()) fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
    sink_ = std::make_unique<Sink>(partial_, ends_with_gz(path_));
}

ShardWriter::~ShardWriter() {
    if (!committed_) {
        sink_.reset();
        std::error_code ec;
        fs::remove(partial_, ec);
    }
}

void ShardWriter::write(const Document& doc) {
    std::string line = serialize_record(doc);
    line.push_back('\n');
    sink_->write(line);
    manifest_.add(doc.source(), unit_.of(doc));
}

ShardManifest ShardWriter::commit() {
    sink_->close();
    std::error_code ec;
    fs::rename(partial_, path_, ec);
    if (ec) throw IoError("cannot finalize " + path_ + ": " + ec.message());
    committed_ = true;
    manifest_.shard_paths = {path_};
    return manifest_;
}

ShardManifest write_shard(std::span<const Document> docs, const std::string& path, const CountUnit& unit) {
    ShardWriter writer(path, unit);
    for (const auto& d : docs) writer.write(d);
    return writer.commit();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
    const auto parent = fs::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty()) fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            throw IoError("write failed: " + path);
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot finalize " + path + ": " + ec.message());
}

void clear_stage_shards(const std::string& dir) {
    std::error_code ec;
    if (!fs::exists(dir, ec)) return;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const auto name = entry.path().filename().string();
        const bool shard = name.starts_with("shard-") &&
                           (name.find(".jsonl") != std::string::npos || name.find(".sig") != std::string::npos);
        if (shard || name.ends_with(".partial")) fs::remove(entry.path(), ec);
    }
    if (ec) throw IoError("cannot clear " + dir + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read error: " + path);
    return ss.str();
}

} // namespace curate
