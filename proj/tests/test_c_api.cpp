#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "curate/curate.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path path;
    Scratch() {
        std::string tmpl = (fs::temp_directory_path() / "capi-XXXXXX").string();
        path = mkdtemp(tmpl.data());
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& n) const { return (path / n).string(); }
};

std::string arabic_text(std::mt19937_64& rng, int lines) {
    std::string out;
    for (int l = 0; l < lines; ++l) {
        if (l) out += '\n';
        for (int w = 0; w < 10; ++w) {
            if (w) out += ' ';
            for (int c = 0, n = 3 + static_cast<int>(rng() % 4); c < n; ++c) {
                const char32_t cp = 0x0627 + static_cast<char32_t>(rng() % 20);
                out += static_cast<char>(0xC0 | (cp >> 6));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            }
        }
        out += '.';
    }
    return out;
}

std::string take(char* s) {
    std::string out = s == nullptr ? "" : s;
    curate_string_free(s);
    return out;
}

} // namespace

TEST_CASE("version and errors") {
    CHECK(std::string(curate_version()).size() > 0);
    curate_filter_config* cfg = nullptr;
    CHECK(curate_filter_config_load("/nonexistent/cfg.json", &cfg) != CURATE_OK);
    CHECK(cfg == nullptr);
    CHECK(std::string(curate_last_error()).size() > 0);
    CHECK(curate_filter_config_new(nullptr) == CURATE_ERR_USAGE);
}

TEST_CASE("filter configuration and single documents") {
    curate_filter_config* cfg = nullptr;
    REQUIRE(curate_filter_config_new(&cfg) == CURATE_OK);
    CHECK(curate_filter_config_set(cfg, "min_words", "abc") == CURATE_ERR_USAGE);
    CHECK(curate_filter_config_set(cfg, "no_such_key", "1") == CURATE_ERR_USAGE);
    CHECK(curate_filter_config_set(cfg, "min_words", "25") == CURATE_OK);
    CHECK(curate_filter_config_merge_json(cfg, "{\"min_chars\": 120}") == CURATE_OK);
    char* js = nullptr;
    REQUIRE(curate_filter_config_to_json(cfg, &js) == CURATE_OK);
    const auto j = nlohmann::json::parse(take(js));
    CHECK(j.at("min_words") == 25);
    CHECK(j.at("min_chars") == 120);

    std::mt19937_64 rng(1);
    const std::string good = arabic_text(rng, 6);
    int kept = 0;
    const char* reason = "x";
    char* scrubbed = nullptr;
    REQUIRE(curate_filter_document(cfg, good.data(), good.size(), &kept, &reason, &scrubbed) == CURATE_OK);
    CHECK(kept == 1);
    CHECK(reason == nullptr);
    CHECK(take(scrubbed) == good);

    const std::string brackets = good + " {x}";
    REQUIRE(curate_filter_document(cfg, brackets.data(), brackets.size(), &kept, &reason, nullptr) == CURATE_OK);
    CHECK(kept == 0);
    CHECK(std::string(reason) == "curly_brackets");
    curate_filter_config_free(cfg);
}

TEST_CASE("signatures through the C API") {
    curate_minhasher* h = nullptr;
    CHECK(curate_minhasher_new("{\"bands\": 0}", &h) == CURATE_ERR_USAGE);
    REQUIRE(curate_minhasher_new(nullptr, &h) == CURATE_OK);
    CHECK(curate_minhasher_width(h) == 112);
    std::vector<uint64_t> a(112), b(112);
    const std::string t = "some sample text";
    REQUIRE(curate_minhasher_sign(h, t.data(), t.size(), a.data(), a.size()) == CURATE_OK);
    REQUIRE(curate_minhasher_sign(h, t.data(), t.size(), b.data(), b.size()) == CURATE_OK);
    CHECK(a == b);
    CHECK(curate_minhasher_sign(h, t.data(), t.size(), a.data(), 3) == CURATE_ERR_USAGE);
    CHECK(curate_minhasher_sign(h, "", 0, a.data(), a.size()) == CURATE_ERR_DATA);
    curate_minhasher_free(h);
}

TEST_CASE("pipeline through the C API") {
    Scratch dir;
    std::mt19937_64 rng(2);
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    std::vector<std::string> texts;
    {
        std::ofstream out(dir / "a/part.jsonl");
        for (int i = 0; i < 30; ++i) {
            texts.push_back(arabic_text(rng, 8));
            out << nlohmann::json{{"id", "a" + std::to_string(i)}, {"text", texts.back()}}.dump() << "\n";
        }
    }
    {
        std::ofstream out(dir / "b/part.jsonl");
        for (int i = 0; i < 10; ++i) {
            out << nlohmann::json{{"id", "b" + std::to_string(i)}, {"text", texts[static_cast<std::size_t>(i)]}}.dump()
                << "\n";
        }
    }
    const nlohmann::json config = {
        {"output", "out"},
        {"sources", {{{"name", "A"}, {"path", "a/*.jsonl"}}, {{"name", "B"}, {"path", "b/*.jsonl"}}}},
    };
    curate_pipeline* p = nullptr;
    REQUIRE(curate_pipeline_from_json(config.dump().c_str(), dir.path.c_str(), &p) == CURATE_OK);
    CHECK(curate_pipeline_set_threads(p, 2) == CURATE_OK);
    char* report = nullptr;
    CHECK(curate_pipeline_run(p, "filter,bogus", &report) == CURATE_ERR_USAGE);
    REQUIRE(curate_pipeline_run(p, nullptr, &report) == CURATE_OK);
    const auto r = nlohmann::json::parse(take(report));
    CHECK(r.at("stages").size() == 3);
    CHECK(r.at("stages")[1].at("total").at("output_docs") == 30);
    curate_pipeline_free(p);

    curate_span_store* store = nullptr;
    REQUIRE(curate_span_store_open((dir / "out/sentdedup/spans.store").c_str(), &store) == CURATE_OK);
    uint8_t zero[16] = {};
    CHECK(curate_span_store_count(store, zero) == 0);
    CHECK(curate_span_store_size(store) > 0);
    curate_span_store_close(store);
    CHECK(curate_span_store_open((dir / "missing.store").c_str(), &store) == CURATE_ERR_IO);

    char* res = nullptr;
    const nlohmann::json mh = {{"inputs", {(dir / "out/filter")}}, {"output", dir / "mh2"}, {"priority", {"A", "B"}}};
    REQUIRE(curate_run_minhash(mh.dump().c_str(), &res) == CURATE_OK);
    CHECK(nlohmann::json::parse(take(res)).at("removed_docs") == 10);
    CHECK(curate_run_minhash("{\"inputs\": [], \"output\": \"x\"}", &res) == CURATE_ERR_USAGE);
    CHECK(curate_run_minhash("not json", &res) == CURATE_ERR_USAGE);

    const nlohmann::json an = {{"consensus", dir / "mh2/consensus.jsonl"},
                               {"stats", dir / "mh2/stats.json"},
                               {"output", dir / "an"}};
    REQUIRE(curate_run_analyze(an.dump().c_str(), &res) == CURATE_OK);
    const auto a = nlohmann::json::parse(take(res));
    CHECK(a.at("histogram").at("depths")[0].at("clusters") == 10);
}
