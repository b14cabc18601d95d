#include <doctest.h>

#include <fstream>
#include <random>

#include "error.hpp"
#include "span_store.hpp"
#include "synth.hpp"

using namespace curate;

namespace {

SpanHash key(std::uint64_t n) { return md5(std::to_string(n)); }

} // namespace

TEST_CASE("md5 test vectors") {
    CHECK(to_hex(md5("")) == "d41d8cd98f00b204e9800998ecf8427e");
    CHECK(to_hex(md5("abc")) == "900150983cd24fb0d6963f7d28e17f72");
    CHECK(to_hex(md5("The quick brown fox jumps over the lazy dog")) == "9e107d9d372bb6826bd81d3542a419d6");
}

TEST_CASE("store file round-trip and lookups") {
    curate::testing::TempDir dir;
    SpanCountBuilder b;
    for (std::uint64_t i = 0; i < 1000; ++i) b.add(key(i), i + 1);
    b.write(dir / "s.store");
    const auto s = SpanCountStore::open(dir / "s.store");
    CHECK(s.size() == 1000);
    for (std::uint64_t i = 0; i < 1000; ++i) CHECK(s.count(key(i)) == i + 1);
    CHECK(s.count(key(5000)) == 0);
    CHECK(std::filesystem::file_size(dir / "s.store") == 16 + 1000 * 24);
}

TEST_CASE("merge adds counts") {
    curate::testing::TempDir dir;
    SpanCountBuilder a, b;
    a.add(key(1), 2);
    b.add(key(1), 2);
    b.add(key(2));
    a.write(dir / "a");
    b.write(dir / "b");
    merge_span_stores({dir / "a", dir / "b"}, dir / "m");
    const auto m = SpanCountStore::open(dir / "m");
    CHECK(m.count(key(1)) == 4);
    CHECK(m.count(key(2)) == 1);
    CHECK(m.size() == 2);
}

TEST_CASE("any partition merges to the same counts") {
    curate::testing::TempDir dir;
    std::mt19937_64 rng(3);
    std::vector<SpanHash> events;
    for (int i = 0; i < 5000; ++i) events.push_back(key(rng() % 700));

    SpanCountBuilder whole;
    for (const auto& e : events) whole.add(e);
    whole.write(dir / "whole");

    for (int parts : {1, 2, 7}) {
        std::vector<SpanCountBuilder> b(static_cast<std::size_t>(parts));
        for (const auto& e : events) b[rng() % b.size()].add(e);
        std::vector<std::string> paths;
        for (std::size_t i = 0; i < b.size(); ++i) {
            paths.push_back(dir / ("p" + std::to_string(parts) + "-" + std::to_string(i)));
            b[i].write(paths.back());
        }
        const auto out = dir / ("m" + std::to_string(parts));
        merge_span_stores(paths, out);
        CHECK(curate::testing::read_text(out) == curate::testing::read_text(dir / "whole"));
    }

    SpanCountBuilder mem;
    SpanCountBuilder other;
    for (std::size_t i = 0; i < events.size(); ++i) (i % 2 ? mem : other).add(events[i]);
    mem.merge(other);
    CHECK(mem.entries() == whole.entries());
}

TEST_CASE("bad store files") {
    curate::testing::TempDir dir;
    CHECK_THROWS_AS(SpanCountStore::open(dir / "missing"), IoError);
    std::ofstream(dir / "junk") << "definitely not a store file";
    CHECK_THROWS_AS(SpanCountStore::open(dir / "junk"), DataError);
}

TEST_CASE("empty stores") {
    curate::testing::TempDir dir;
    SpanCountBuilder().write(dir / "e");
    CHECK(SpanCountStore::open(dir / "e").size() == 0);
    merge_span_stores({dir / "e", dir / "e"}, dir / "m");
    CHECK(SpanCountStore::open(dir / "m").count(key(0)) == 0);
    merge_span_stores({}, dir / "none");
    CHECK(SpanCountStore::open(dir / "none").size() == 0);
}
