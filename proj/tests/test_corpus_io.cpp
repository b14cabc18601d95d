#include <doctest.h>


#include <filesystem>
#include <fstream>

#include "corpus_io.hpp"
#include "error.hpp"
#include "synth.hpp"

using namespace curate;
using curate::testing::TempDir;

namespace {

void write_raw(const std::string& path, const std::string& body) {
    std::ofstream(path, std::ios::binary) << body;
}

} // namespace

TEST_CASE("ids default to source/shard/line") {
    TempDir dir;
    write_raw(dir / "s.jsonl", "{\"text\":\"a\"}\n{\"text\":\"b\"}\n{\"text\":\"c\"}\n");
    ReadStats st;
    const auto docs = read_shards(dir / "*.jsonl", "web", &st);
    REQUIRE(docs.size() == 3);
    CHECK(docs[0].id() == "web/0/0");
    CHECK(docs[1].id() == "web/0/1");
    CHECK(docs[2].id() == "web/0/2");
    CHECK(docs[2].source() == "web");
    CHECK(st.records == 3);
    CHECK(st.malformed == 0);
}

TEST_CASE("malformed records are tallied and skipped") {
    TempDir dir;
    write_raw(dir / "s.jsonl", "{\"text\":\"a\"}\nnot json\n{\"id\":\"k\",\"text\":\"b\"}\n{\"text\":5}\n[1,2]\n");
    ReadStats st;
    const auto docs = read_shards(dir / "s.jsonl", "web", &st);
    REQUIRE(docs.size() == 2);
    CHECK(docs[1].id() == "k");
    CHECK(st.malformed == 3);
}

TEST_CASE("empty shard yields nothing") {
    TempDir dir;
    write_raw(dir / "e.jsonl", "");
    ReadStats st;
    CHECK(read_shards(dir / "e.jsonl", "web", &st).empty());
    CHECK(st.malformed == 0);
}

TEST_CASE("missing input is an I/O error") {
    CHECK_THROWS_AS(expand_glob("/nonexistent/dir/*.jsonl"), IoError);
    CHECK_THROWS_AS(read_shard("/nonexistent/file.jsonl", 0, {}, [](Document&&) {}), IoError);
}

TEST_CASE("paths are read in lexicographic order") {
    TempDir dir;
    write_raw(dir / "b.jsonl", "{\"text\":\"second\"}\n");
    write_raw(dir / "a.jsonl", "{\"text\":\"first\"}\n");
    const auto docs = read_shards(dir / "*.jsonl", "s");
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].text() == "first");
    CHECK(docs[1].id() == "s/1/0");
}

TEST_CASE("write then read round-trips id, text, source and extra fields") {
    TempDir dir;
    std::vector<Document> docs = {
        Document("a1", "قال \"المدير\": «مرحبا»\nسطر\tثان", "ar", {{"url", "http://x"}, {"tokens", 3}}),
        Document("a2", "", "ar"),
        Document("a3", "line with \\ backslash and \u0001 control", "ar"),
    };
    const auto m = write_shard(docs, dir / "out.jsonl");
    CHECK(m.total_docs() == 3);
    CHECK(m.per_source_doc_counts.at("ar") == 3);

    ReadOptions ro;
    std::vector<Document> back;
    read_shard(dir / "out.jsonl", 0, ro, [&](Document&& d) { back.push_back(std::move(d)); });
    REQUIRE(back.size() == docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(back[i] == docs[i]);
}

TEST_CASE("zero documents give a valid empty shard") {
    TempDir dir;
    const auto m = write_shard({}, dir / "empty.jsonl");
    CHECK(m.total_docs() == 0);
    CHECK(std::filesystem::exists(dir / "empty.jsonl"));
    CHECK(read_shards(dir / "empty.jsonl", "x").empty());
}

TEST_CASE("gzip shards round-trip") {
    TempDir dir;
    std::vector<Document> docs = {Document("1", "نص مضغوط", "z"), Document("2", "more", "z")};
    write_shard(docs, dir / "c.jsonl.gz");
    // The file really is gzip.
    std::ifstream in(dir / "c.jsonl.gz", std::ios::binary);
    unsigned char magic[2] = {};
    in.read(reinterpret_cast<char*>(magic), 2);
    CHECK(magic[0] == 0x1f);
    CHECK(magic[1] == 0x8b);
    const auto back = read_shards(dir / "c.jsonl.gz", "z");
    REQUIRE(back.size() == 2);
    CHECK(back[0].text() == "نص مضغوط");
}

TEST_CASE("an abandoned writer leaves no shard behind") {
    TempDir dir;
    {
        ShardWriter w(dir / "p.jsonl", CountUnit::words());
        w.write(Document("1", "x", "s"));
    }
    CHECK_FALSE(std::filesystem::exists(dir / "p.jsonl"));
    CHECK_FALSE(std::filesystem::exists(dir / "p.jsonl.partial"));
}

TEST_CASE("manifest accounting") {
    ShardManifest a;
    a.add("x", 10);
    a.add("y", 5);
    ShardManifest b;
    b.add("x", 1);
    b.malformed = 2;
    a.merge(b);
    CHECK(a.total_docs() == 3);
    CHECK(a.total_units() == 16);
    CHECK(a.per_source_doc_counts.at("x") == 2);
    CHECK(a.malformed == 2);
    const auto back = ShardManifest::from_json(a.to_json());
    CHECK(back.per_source_unit_counts == a.per_source_unit_counts);
}

TEST_CASE("authoritative source overrides the record") {
    Document d;
    ReadOptions ro;
    ro.source = "cfg";
    REQUIRE(parse_record(R"({"text":"t","source":"rec"})", 0, 0, ro, d));
    CHECK(d.source() == "cfg");
    ReadOptions none;
    REQUIRE(parse_record(R"({"text":"t","source":"rec"})", 0, 0, none, d));
    CHECK(d.source() == "rec");
    CHECK_FALSE(parse_record(R"({"text":"t"})", 0, 0, none, d));
}

TEST_CASE("reads are deterministic") {
    TempDir dir;
    curate::testing::Synth synth(3);
    std::vector<Document> docs;
    for (int i = 0; i < 50; ++i) docs.emplace_back("", synth.clean_document(3), "s");
    for (std::size_t i = 0; i < docs.size(); ++i) docs[i] = Document(std::to_string(i), docs[i].text(), "s");
    const auto pattern = curate::testing::write_corpus(dir.path().string(), "r", docs, 7);
    CHECK(read_shards(pattern, "s") == read_shards(pattern, "s"));
}
